"""HTTP service endpoints and the WebSocket play carrier."""

import pytest
from fastapi.testclient import TestClient

from plotwright.service.app import create_app

from .conftest import FIXTURES

SESSIONS = FIXTURES / "sessions"


@pytest.fixture()
def client():
    return TestClient(create_app())


def read_transcript(name):
    """Yields (direction, line) pairs from a recorded session."""
    out = []
    for raw in (SESSIONS / name).read_text(encoding="utf-8").splitlines():
        direction, _, line = raw.partition(" ")
        out.append((direction, line))
    return out


class TestRest:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    def test_validate_clean_fixture(self, client, kaktus_text):
        resp = client.post("/scenario/validate", json={"source": kaktus_text})
        body = resp.json()
        assert body["ok"] is True
        assert body["findings"] == []

    def test_validate_reports_findings(self, client, kaktus_text):
        broken = kaktus_text.replace("scene u1 undesirable kernel", "scene u1 undesirable end kernel")
        body = client.post("/scenario/validate", json={"source": broken}).json()
        assert body["ok"] is False
        assert body["findings"][0]["code"] == "E1"

    def test_compile_stats(self, client, kaktus_text):
        body = client.post(
            "/scenario/compile", json={"source": kaktus_text, "minimizer": "hopcroft"}
        ).json()
        assert body["ok"] is True
        assert (body["states_before"], body["states_after"]) == (9, 9)
        assert body["dump"].startswith("start q1")

    def test_compile_parse_errors(self, client):
        body = client.post("/scenario/compile", json={"source": "garbage"}).json()
        assert body["ok"] is False
        assert body["parse_errors"]

    def test_simulate_aggregates(self, client, kaktus_text):
        body = client.post(
            "/simulate",
            json={
                "source": kaktus_text,
                "runs": 25,
                "seed": 0,
                "policy": "random",
                "horizon": 12,
                "anticipator": True,
                "max_beats": 40,
            },
        ).json()
        assert body["ok"] is True
        assert len(body["runs"]) == 25
        assert body["unrecovered_runs"] == 0
        assert sum(body["end_state_distribution"].values()) == 25

    def test_simulate_zero_runs(self, client, kaktus_text):
        body = client.post(
            "/simulate", json={"source": kaktus_text, "runs": 0}
        ).json()
        assert body["ok"] is True
        assert body["runs"] == []

    def test_bench_rows(self, client):
        body = client.post("/bench", json={"scenes": 8, "max_depth": 4, "branching": 3}).json()
        nodes = [row["nodes"] for row in body["exhaustive"]]
        assert nodes[0] == 1
        assert all(b > a for a, b in zip(nodes, nodes[1:]))
        beats = [row["beats"] for row in body["lookahead"]]
        assert beats == [1, 2, 3, 4]

    def test_session_lifecycle(self, client, kaktus_text):
        created = client.post("/sessions", json={"source": kaktus_text, "seed": 7}).json()
        sid = created["session_id"]
        assert created["scene"] == "q1"
        state = client.get(f"/sessions/{sid}").json()
        assert state["finished"] is False
        assert client.delete(f"/sessions/{sid}").status_code == 204
        assert client.get(f"/sessions/{sid}").status_code == 404

    def test_session_rejects_bad_source(self, client):
        resp = client.post("/sessions", json={"source": "nope"})
        assert resp.status_code == 422


class TestWebSocket:
    def replay(self, client, source, recipe_name, seed, horizon, max_beats):
        created = client.post(
            "/sessions",
            json={
                "source": source,
                "seed": seed,
                "debug": True,
                "horizon": horizon,
                "max_beats": max_beats,
            },
        ).json()
        sid = created["session_id"]
        transcript = read_transcript(recipe_name)
        received = []
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            for direction, line in transcript:
                if direction == ">":
                    ws.send_text(line)
                else:
                    received.append(ws.receive_text())
        return [line for d, line in transcript if d == "<"], received

    def test_golden_gossip_session(self, client, gossip_text):
        expected, received = self.replay(
            client, gossip_text, "gossip_seed7.txt", seed=7, horizon=4, max_beats=8
        )
        assert received == expected

    def test_golden_kaktus_session(self, client, kaktus_text):
        expected, received = self.replay(
            client, kaktus_text, "kaktus_seed7.txt", seed=7, horizon=12, max_beats=30
        )
        assert received == expected

    def test_version_mismatch_is_an_error_banner(self, client, gossip_text):
        created = client.post("/sessions", json={"source": gossip_text, "seed": 1}).json()
        with client.websocket_connect(f"/sessions/{created['session_id']}/ws") as ws:
            ws.send_text("hello\tversion=99")
            reply = ws.receive_text()
            assert reply.startswith("error\t")
            assert "version" in reply

    def test_malformed_frame_keeps_session(self, client, gossip_text):
        created = client.post("/sessions", json={"source": gossip_text, "seed": 1}).json()
        with client.websocket_connect(f"/sessions/{created['session_id']}/ws") as ws:
            ws.send_text("hello\tversion=1")
            while True:
                line = ws.receive_text()
                if line.startswith("value\t"):
                    break
            ws.send_text("BOGUS")
            assert ws.receive_text().startswith("error\t")
            ws.send_text("input\ttext=")
            lines = [ws.receive_text()]
            while not lines[-1].startswith("state\t"):
                lines.append(ws.receive_text())
            assert any("beat=1" in line for line in lines)

    def test_unknown_session(self, client):
        with client.websocket_connect("/sessions/nope/ws") as ws:
            assert ws.receive_text().startswith("error\t")

    def test_reconnect_resumes_from_state_frame(self, client, kaktus_text):
        created = client.post(
            "/sessions", json={"source": kaktus_text, "seed": 7, "max_beats": 30}
        ).json()
        sid = created["session_id"]
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            ws.send_text("hello\tversion=1")
            ws.receive_text()  # hello
            first_state = ws.receive_text()
            assert "beat=0" in first_state
            # drain initial values
            line = ws.receive_text()
            while not line.startswith("value\t"):
                line = ws.receive_text()
            ws.send_text("input\ttext=")
            line = ws.receive_text()
            while not line.startswith("state\t"):
                line = ws.receive_text()
            beat_after = line
        # reconnect: the server-side session kept its progress
        with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
            ws.send_text("hello\tversion=1")
            ws.receive_text()
            resumed_state = ws.receive_text()
            assert resumed_state == beat_after.replace("state\t", "state\t", 1)
