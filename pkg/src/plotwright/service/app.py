"""HTTP/WebSocket service exposing the story engine.

REST endpoints cover compilation, validation, headless simulation, and the
search-cost bench; live play sessions are created over REST and driven over
a WebSocket speaking the line protocol (one frame per text message).
"""

from __future__ import annotations

import time
import uuid

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .. import __version__
from ..bench import run_bench
from ..automaton import compile_scenario, dump_automaton, dump_dot, minimize_for_report
from ..errors import CompileError, ProtocolViolationError
from ..protocol import PROTOCOL_VERSION, decode_frame, encode_frame, frame
from ..runtime import Session, run_headless
from ..scenario import parse_scenario, validate_scenario
from .models import (
    BenchRequest,
    BenchResponse,
    BenchRow,
    CompileRequest,
    CompileResponse,
    FindingModel,
    HealthResponse,
    IssueModel,
    LookaheadRow,
    RunSummary,
    SessionRequest,
    SessionResponse,
    SessionStateResponse,
    SimulateRequest,
    SimulateResponse,
    ValidateRequest,
    ValidateResponse,
)


def create_app(
    play_session: Session | None = None,
    debug: bool = False,
    transcript_path: str | None = None,
) -> FastAPI:
    app = FastAPI(title="plotwright", version=__version__)
    app.state.sessions = {}
    app.state.ws_busy = set()
    app.state.transcript_path = transcript_path
    if play_session is not None:
        app.state.sessions["default"] = play_session

    def transcribe(direction: str, line: str) -> None:
        if app.state.transcript_path:
            with open(app.state.transcript_path, "a", encoding="utf-8") as fh:
                fh.write(f"{direction} {line}\n")

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(version=__version__)

    @app.post("/scenario/validate", response_model=ValidateResponse)
    def validate(req: ValidateRequest):
        result = parse_scenario(req.source)
        if not result.ok:
            return ValidateResponse(ok=False, parse_errors=_issues(result.errors))
        report = validate_scenario(result.scenario)
        return ValidateResponse(ok=not report.errors, findings=_findings(report.findings))

    @app.post("/scenario/compile", response_model=CompileResponse)
    def compile_(req: CompileRequest):
        result = parse_scenario(req.source)
        if not result.ok:
            return CompileResponse(ok=False, parse_errors=_issues(result.errors))
        report = validate_scenario(result.scenario)
        if report.errors:
            return CompileResponse(ok=False, findings=_findings(report.findings))
        started = time.perf_counter()
        automaton = compile_scenario(result.scenario)
        try:
            minimized = minimize_for_report(automaton, req.minimizer)
        except CompileError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        wall_ms = (time.perf_counter() - started) * 1000.0
        return CompileResponse(
            ok=True,
            findings=_findings(report.findings),
            states_before=len(automaton.states),
            states_after=len(minimized.states),
            dump=dump_automaton(automaton),
            dot=dump_dot(automaton) if req.want_dot else "",
            wall_ms=wall_ms,
        )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate_(req: SimulateRequest):
        result = parse_scenario(req.source)
        if not result.ok:
            return SimulateResponse(ok=False, parse_errors=_issues(result.errors))
        report = validate_scenario(result.scenario)
        if report.errors:
            return SimulateResponse(ok=False, findings=_findings(report.findings))
        summaries = []
        distribution: dict[str, int] = {}
        flagged = unrecovered = interventions = 0
        beats_total = 0
        wall_total = 0.0
        for i in range(req.runs):
            r = run_headless(
                result.scenario,
                policy=req.policy,
                seed=req.seed + i,
                horizon=req.horizon,
                anticipator="on" if req.anticipator else "off",
                max_beats=req.max_beats,
            )
            outcome = "end" if r.ended_at_end else ("dead" if r.ended_dead else "stalled")
            distribution[r.final_state] = distribution.get(r.final_state, 0) + 1
            if r.undesirable_entered:
                flagged += 1
            if r.unrecovered:
                unrecovered += 1
            interventions += len(r.interventions)
            beats_total += r.beats
            wall_total += r.wall_ms
            summaries.append(
                RunSummary(
                    seed=r.seed,
                    trace=list(r.trace),
                    final_state=r.final_state,
                    outcome=outcome,
                    beats=r.beats,
                    undesirable_entered=r.undesirable_entered,
                    undesirable_recovered=r.undesirable_recovered,
                    unrecovered=r.unrecovered,
                    interventions=len(r.interventions),
                    wall_ms=r.wall_ms,
                )
            )
        n = max(1, req.runs)
        return SimulateResponse(
            ok=True,
            findings=_findings(report.findings),
            runs=summaries,
            end_state_distribution=distribution,
            flagged_runs=flagged,
            unrecovered_runs=unrecovered,
            interventions_total=interventions,
            mean_beats=beats_total / n,
            mean_wall_ms=wall_total / n,
            mean_wall_ms_per_beat=(wall_total / beats_total) if beats_total else 0.0,
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench_(req: BenchRequest):
        report = run_bench(req.scenes, req.max_depth, req.branching)
        return BenchResponse(
            scenes=report.scenes,
            branching=report.branching,
            exhaustive=[BenchRow(depth=d, nodes=n) for d, n in report.exhaustive],
            lookahead=[LookaheadRow(horizon=h, beats=b) for h, b in report.lookahead],
        )

    @app.post("/sessions", response_model=SessionResponse, status_code=201)
    def create_session(req: SessionRequest):
        result = parse_scenario(req.source)
        if not result.ok:
            raise HTTPException(status_code=422, detail=[e.render() for e in result.errors])
        report = validate_scenario(result.scenario)
        if report.errors:
            raise HTTPException(status_code=422, detail=[f.render() for f in report.errors])
        session = Session(
            result.scenario,
            seed=req.seed,
            anticipator="on" if req.anticipator else "off",
            horizon=req.horizon,
            max_beats=req.max_beats,
            debug=req.debug or debug,
        )
        session.mode = "interactive"
        session_id = uuid.uuid4().hex[:12]
        app.state.sessions[session_id] = session
        return SessionResponse(
            session_id=session_id,
            scenario=session.scenario.name,
            scene=session.state.model.active_scene or "-",
            beat=session.state.beat,
        )

    @app.get("/sessions/{session_id}", response_model=SessionStateResponse)
    def session_state(session_id: str):
        session = app.state.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        return SessionStateResponse(
            session_id=session_id,
            scenario=session.scenario.name,
            scene=session.state.model.active_scene or "-",
            beat=session.state.beat,
            finished=session.finished,
            trace=list(session.trace),
        )

    @app.delete("/sessions/{session_id}", status_code=204)
    def drop_session(session_id: str):
        if session_id not in app.state.sessions:
            raise HTTPException(status_code=404, detail="no such session")
        del app.state.sessions[session_id]
        app.state.ws_busy.discard(session_id)

    @app.websocket("/sessions/{session_id}/ws")
    async def play(ws: WebSocket, session_id: str):
        session = app.state.sessions.get(session_id)
        await ws.accept()
        if session is None:
            await ws.send_text(encode_frame(frame("error", reason="no such session")))
            await ws.close()
            return
        if session_id in app.state.ws_busy:
            await ws.send_text(encode_frame(frame("error", reason="busy")))
            await ws.close()
            return
        app.state.ws_busy.add(session_id)

        async def reply(f):
            line = encode_frame(f)
            transcribe("<", line)
            await ws.send_text(line)

        try:
            raw = await ws.receive_text()
            transcribe(">", raw)
            try:
                hello = decode_frame(raw)
                if hello.type != "hello":
                    raise ProtocolViolationError("expected hello")
            except ProtocolViolationError as exc:
                await reply(frame("error", reason=str(exc)))
                await ws.close()
                return
            if hello.get("version", PROTOCOL_VERSION) != PROTOCOL_VERSION:
                await reply(
                    frame("error", reason=f"version mismatch, server speaks {PROTOCOL_VERSION}")
                )
                await ws.close()
                return
            for f in session.hello_frames():
                await reply(f)
            while True:
                raw = await ws.receive_text()
                transcribe(">", raw)
                try:
                    incoming = decode_frame(raw)
                    if incoming.type != "input":
                        raise ProtocolViolationError(f"unexpected {incoming.type} frame")
                except ProtocolViolationError as exc:
                    # the offending frame is dropped; the session stays up
                    await reply(frame("error", reason=str(exc)))
                    continue
                for f in session.handle_input(incoming.get("text", "")):
                    await reply(f)
                if session.finished:
                    break
            await ws.close()
        except WebSocketDisconnect:
            pass
        finally:
            app.state.ws_busy.discard(session_id)

    return app


def _issues(errors) -> list[IssueModel]:
    return [IssueModel(code=e.code, message=e.message, line=e.line, col=e.col) for e in errors]


def _findings(findings) -> list[FindingModel]:
    return [
        FindingModel(code=f.code, severity=f.severity, subject=f.subject, message=f.message)
        for f in findings
    ]
