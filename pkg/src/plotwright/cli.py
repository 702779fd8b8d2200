"""Operator command line.

Every data command (`compile`, `simulate`, `bench`) is a thin client of the
HTTP service: by default the requests run against an in-process instance of
the app, and `--server URL` points them at a remote one instead. `play`
starts the service itself and serves the WebSocket carrier.

Exit codes: 0 success, 1 scenario lint errors, 2 parse errors or unreadable
input, 3 server could not bind. The PLOT_SEED environment variable, when
set, overrides any seed given on the command line.
"""

from __future__ import annotations

import asyncio
import os
import sys
from pathlib import Path

import click
import httpx

from .service.app import create_app


def _post(server: str | None, path: str, payload: dict) -> tuple[int, dict]:
    """POST against a remote service, or an in-process app when no URL given."""

    async def go():
        if server:
            async with httpx.AsyncClient(base_url=server, timeout=600.0) as client:
                resp = await client.post(path, json=payload)
                return resp.status_code, resp.json()
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://plotwright.local", timeout=600.0
        ) as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.json()

    return asyncio.run(go())


def _read_scenario(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"cannot read {path}: {exc}", err=True)
        sys.exit(2)


def _effective_seed(seed: int) -> int:
    env = os.environ.get("PLOT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            click.echo(f"ignoring non-numeric PLOT_SEED={env!r}", err=True)
    return seed


def _report_failure(payload: dict) -> int:
    for issue in payload.get("parse_errors", []):
        click.echo(f"{issue['line']}:{issue['col']}: {issue['code']}: {issue['message']}", err=True)
    worst = 0
    for f in payload.get("findings", []):
        click.echo(f"{f['code']} [{f['severity']}] {f['subject']}: {f['message']}", err=True)
        if f["severity"] == "error":
            worst = 1
    if payload.get("parse_errors"):
        return 2
    return worst or 1


@click.group()
def main():
    """Anticipatory plot guidance for interactive narratives."""


@main.command()
@click.argument("path")
@click.option("--minimize", "minimizer", type=click.Choice(["hopcroft", "brzozowski"]), default="hopcroft", show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Write the automaton dump here.")
@click.option("--dump-dot", "dot_out", type=click.Path(), default=None, help="Write a graph description here.")
@click.option("--server", default=None, help="Use a remote service instead of in-process.")
def compile(path, minimizer, out, dot_out, server):
    """Compile a scenario to its canonical automaton."""
    source = _read_scenario(path)
    status, payload = _post(
        server,
        "/scenario/compile",
        {"source": source, "minimizer": minimizer, "want_dot": bool(dot_out)},
    )
    if status == 422:
        click.echo(payload.get("detail", "compile rejected"), err=True)
        sys.exit(1)
    if not payload["ok"]:
        sys.exit(_report_failure(payload))
    for f in payload.get("findings", []):
        click.echo(f"{f['code']} [{f['severity']}] {f['subject']}: {f['message']}", err=True)
    click.echo(
        f"states {payload['states_before']} -> {payload['states_after']} "
        f"({minimizer}, {payload['wall_ms']:.1f} ms)"
    )
    if out:
        Path(out).write_text(payload["dump"], encoding="utf-8")
        click.echo(f"dump written to {out}")
    else:
        click.echo(payload["dump"], nl=False)
    if dot_out:
        Path(dot_out).write_text(payload["dot"], encoding="utf-8")
        click.echo(f"graph written to {dot_out}")
    sys.exit(0)


@main.command()
@click.argument("path")
@click.option("--runs", default=1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--policy", type=click.Choice(["silence", "random"]), default="silence", show_default=True)
@click.option("--horizon", default=6, show_default=True)
@click.option("--anticipator/--no-anticipator", default=True, show_default=True)
@click.option("--max-beats", default=60, show_default=True)
@click.option("--tsv", is_flag=True, help="Also print one tab-separated line per run.")
@click.option("--server", default=None)
def simulate(path, runs, seed, policy, horizon, anticipator, max_beats, tsv, server):
    """Run seeded headless stories and report steering statistics."""
    source = _read_scenario(path)
    seed = _effective_seed(seed)
    _, payload = _post(
        server,
        "/simulate",
        {
            "source": source,
            "runs": runs,
            "seed": seed,
            "policy": policy,
            "horizon": horizon,
            "anticipator": anticipator,
            "max_beats": max_beats,
        },
    )
    if not payload["ok"]:
        sys.exit(_report_failure(payload))
    if tsv:
        for run in payload["runs"]:
            click.echo(
                "\t".join(
                    [
                        str(run["seed"]),
                        " ".join(run["trace"]) or "-",
                        run["final_state"],
                        run["outcome"],
                        str(run["beats"]),
                        f"{run['undesirable_entered']}/{run['undesirable_recovered']}",
                        str(run["interventions"]),
                    ]
                )
            )
    click.echo(f"runs: {runs}  policy: {policy}  anticipator: {'on' if anticipator else 'off'}")
    dist = "  ".join(f"{k}:{v}" for k, v in sorted(payload["end_state_distribution"].items()))
    click.echo(f"final states: {dist}")
    click.echo(
        f"undesirable: flagged {payload['flagged_runs']} runs, "
        f"unrecovered {payload['unrecovered_runs']}"
    )
    click.echo(f"interventions: {payload['interventions_total']}")
    click.echo(
        f"mean beats {payload['mean_beats']:.1f}, mean wall {payload['mean_wall_ms']:.2f} ms/run, "
        f"{payload['mean_wall_ms_per_beat']:.3f} ms/beat"
    )
    sys.exit(0)


@main.command()
@click.option("--scenes", default=16, show_default=True)
@click.option("--depth", default=6, show_default=True)
@click.option("--branching", default=3, show_default=True)
@click.option("--server", default=None)
def bench(scenes, depth, branching, server):
    """Exhaustive search growth vs look-ahead cost on a synthetic scenario."""
    _, payload = _post(
        server, "/bench", {"scenes": scenes, "max_depth": depth, "branching": branching}
    )
    click.echo(f"synthetic scenario: {payload['scenes']} scenes, branching {payload['branching']}")
    click.echo("exhaustive search:")
    for row in payload["exhaustive"]:
        click.echo(f"  depth {row['depth']}\tnodes {row['nodes']}")
    click.echo("look-ahead:")
    for row in payload["lookahead"]:
        click.echo(f"  horizon {row['horizon']}\tbeats {row['beats']}")
    sys.exit(0)


@main.command()
@click.argument("path")
@click.option("--port", default=7700, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--debug", is_flag=True, help="Mirror steering interventions to the client.")
@click.option("--max-beats", default=200, show_default=True)
@click.option("--transcript", type=click.Path(), default=None,
              help="Append every frame of the session to this file.")
def play(path, port, host, seed, debug, max_beats, transcript):
    """Serve one interactive session over HTTP + WebSocket."""
    import uvicorn

    from .runtime import Session
    from .scenario import parse_scenario, validate_scenario

    source = _read_scenario(path)
    seed = _effective_seed(seed)
    result = parse_scenario(source)
    if not result.ok:
        for e in result.errors:
            click.echo(e.render(), err=True)
        sys.exit(2)
    report = validate_scenario(result.scenario)
    if report.errors:
        for f in report.errors:
            click.echo(f.render(), err=True)
        sys.exit(1)
    session = Session(result.scenario, seed=seed, debug=debug, max_beats=max_beats)
    session.mode = "interactive"
    app = create_app(play_session=session, debug=debug, transcript_path=transcript)
    click.echo(f"serving {result.scenario.name} on ws://{host}:{port}/sessions/default/ws")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        click.echo(f"cannot serve on {host}:{port}: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
