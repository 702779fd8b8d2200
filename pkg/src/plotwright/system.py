"""Live system state and its deep-copy snapshot.

A SystemState bundles everything that evolves during a story: the agent
ensemble, global parameters, the model's current state, and the model's
random stream. A SystemSnapshot is a bit-independent copy of all of it,
used as the unit of side-effect-free look-ahead.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import agents as ag
from .automaton import ModelState
from .scenario import ParamPath


@dataclass
class SystemState:
    agents: dict  # name -> AgentState, insertion order = declaration order
    globals: dict  # name -> tenths int
    model: ModelState
    model_rng: random.Random
    beat: int = 0

    def agent(self, name: str) -> ag.AgentState | None:
        return self.agents.get(name)


@dataclass(frozen=True)
class SystemSnapshot:
    agent_snaps: tuple  # of ag.Snapshot, one per live agent
    globals: tuple  # sorted (name, value) pairs
    model: ModelState
    rng_state: object
    beat: int


def capture(state: SystemState) -> SystemSnapshot:
    return SystemSnapshot(
        agent_snaps=tuple(ag.snapshot(a) for a in state.agents.values()),
        globals=tuple(sorted(state.globals.items())),
        model=state.model,
        rng_state=state.model_rng.getstate(),
        beat=state.beat,
    )


def restore(snap: SystemSnapshot) -> SystemState:
    rng = random.Random()
    rng.setstate(snap.rng_state)
    return SystemState(
        agents={s.agent_id: ag.restore(s) for s in snap.agent_snaps},
        globals=dict(snap.globals),
        model=snap.model,
        model_rng=rng,
        beat=snap.beat,
    )


def resolve_path(state: SystemState, path: ParamPath):
    """Read a parameter path; returns None when nothing is there."""
    if path.kind == "world":
        return state.globals.get(path.name)
    if path.kind == "fact":
        agent = state.agents.get(path.agent)
        if agent is None:
            return None
        return agent.wm.get_value(path.predicate, path.key_args)
    raise ValueError(f"cannot resolve {path.kind} path here")


def write_path(state: SystemState, path: ParamPath, value) -> None:
    if path.kind == "world":
        state.globals[path.name] = value
        return
    if path.kind == "fact":
        agent = state.agents.get(path.agent)
        if agent is None:
            raise KeyError(path.agent)
        agent.wm.assert_fact(ag.Fact(path.predicate, tuple(path.key_args) + (value,)))
        return
    raise ValueError(f"cannot write {path.kind} path")


def fingerprint(state: SystemState) -> str:
    """Stable digest of everything but the rng, for isolation tests."""
    parts = [a.fingerprint() for a in state.agents.values()]
    parts.append(";".join(f"{k}={v}" for k, v in sorted(state.globals.items())))
    parts.append(f"{state.model.current}|{','.join(sorted(state.model.played))}")
    return "\n".join(parts)
