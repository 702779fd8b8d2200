"""The anticipatory controller.

Between agent steps, every character checks in at a synchronization barrier.
When the last one arrives the controller holds a full snapshot of the live
system: it replays the story forward on copies (same rng, silent player),
and if the predicted trajectory crosses into an undesirable model state it
searches the effector catalog for the cheapest set of parameter updates
whose application steers the replay clear, then applies exactly that set to
the live system before any agent takes its next step.

Predictions stand until the sensibility check sees the live story diverge
from them (unexpected player input, unpredicted model move) or their horizon
runs out; either way the next barrier re-snapshots and re-predicts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import system as sysmod
from .conditions import ConditionEvaluator
from .effectors import apply as apply_effector, stage
from .engine import BeatEngine
from .errors import BarrierTimeoutError, HorizonZeroError
from .system import SystemSnapshot, SystemState

VERDICT_OK = "ok"
VERDICT_UNDESIRABLE = "enters_undesirable"
VERDICT_DEAD = "enters_dead"


@dataclass(frozen=True)
class PredEntry:
    beat: int
    evals: tuple
    model_after: str
    scene_after: str | None
    events: tuple


@dataclass(frozen=True)
class Prediction:
    base_beat: int
    horizon: int
    trajectory: tuple  # of PredEntry
    verdict: str
    verdict_beat: int | None

    def entry_at(self, beat: int) -> PredEntry | None:
        for entry in self.trajectory:
            if entry.beat == beat:
                return entry
        return None

    def covers(self, beat: int) -> bool:
        return self.base_beat <= beat < self.base_beat + self.horizon


@dataclass(frozen=True)
class Intervention:
    beat: int
    effectors: tuple  # of Effector
    candidates_evaluated: int
    feasible: tuple  # ids of single candidates (or tuples) whose replay came back ok
    motivation: Prediction
    after: Prediction
    results: tuple = ()  # ApplyResults, filled at application time

    def ids(self) -> tuple:
        return tuple(e.id for e in self.effectors)


def simulate(
    engine: BeatEngine,
    snapshot: SystemSnapshot,
    horizon: int,
    player_stub=None,
) -> Prediction:
    """Side-effect-free forward replay of the system from a snapshot."""
    if horizon < 1:
        raise HorizonZeroError("look-ahead needs a horizon of at least one beat")
    sim = sysmod.restore(snapshot)
    twin = engine.fork()
    trajectory = []
    verdict = VERDICT_OK
    verdict_beat = None
    for _ in range(horizon):
        line = player_stub.next_line(sim.beat) if player_stub else None
        moves = []
        if line:
            from .engine import convert_input

            moves.append(convert_input(line, engine.scenario))
        result = twin.run_beat(sim, moves)
        trajectory.append(
            PredEntry(
                beat=result.beat,
                evals=result.evals,
                model_after=sim.model.current,
                scene_after=sim.model.active_scene,
                events=tuple(result.events),
            )
        )
        if verdict == VERDICT_OK:
            if result.dead:
                verdict, verdict_beat = VERDICT_DEAD, result.beat
            elif twin.automaton.desirability.get(sim.model.current) == "undesirable":
                verdict, verdict_beat = VERDICT_UNDESIRABLE, result.beat
        if result.ended:
            break
    return Prediction(snapshot.beat, horizon, tuple(trajectory), verdict, verdict_beat)


def search_effectors(
    engine: BeatEngine,
    snapshot: SystemSnapshot,
    prediction: Prediction,
    catalog,
    k_max: int = 2,
    horizon: int | None = None,
) -> Intervention | None:
    """Iterative-deepening search for the cheapest steering set.

    Size one evaluates every candidate (the feasible set is reported); from
    size two upward, cost-ordered combinations are taken until one replay
    comes back clean. If nothing prevents the bad entry, the candidate that
    delays it longest wins, as the resilience fallback.
    """
    if not catalog:
        return None
    horizon = horizon or prediction.horizon
    ordered = sorted(catalog, key=lambda e: (e.cost, e.id))
    evaluated = 0
    feasible = []
    best = None  # (entry_delay, cost, ids, effectors, after)

    def trial(effs):
        nonlocal evaluated, best
        evaluated += 1
        sim = sysmod.restore(snapshot)
        try:
            for e in effs:
                apply_effector(e, sim, engine.scenario)
        except Exception:
            return None
        after = simulate(engine, sysmod.capture(sim), horizon)
        if after.verdict == VERDICT_OK:
            return after
        entry = after.verdict_beat if after.verdict_beat is not None else -1
        cost = sum(e.cost for e in effs)
        key = (-entry, cost, tuple(e.id for e in effs))
        if best is None or key < best[0]:
            best = (key, effs, after)
        return None

    for e in ordered:
        after = trial((e,))
        if after is not None:
            feasible.append(((e,), after))
    if feasible:
        winner, after = min(feasible, key=lambda fa: (sum(e.cost for e in fa[0]), fa[0][0].id))
        return Intervention(
            beat=snapshot.beat,
            effectors=winner,
            candidates_evaluated=evaluated,
            feasible=tuple(f[0][0].id for f in feasible),
            motivation=prediction,
            after=after,
        )

    for size in range(2, k_max + 1):
        combos = sorted(
            itertools.combinations(ordered, size),
            key=lambda effs: (sum(e.cost for e in effs), tuple(e.id for e in effs)),
        )
        for effs in combos:
            after = trial(effs)
            if after is not None:
                return Intervention(
                    beat=snapshot.beat,
                    effectors=effs,
                    candidates_evaluated=evaluated,
                    feasible=(tuple(e.id for e in effs),),
                    motivation=prediction,
                    after=after,
                )

    if best is not None:
        _, effs, after = best
        return Intervention(
            beat=snapshot.beat,
            effectors=effs,
            candidates_evaluated=evaluated,
            feasible=(),
            motivation=prediction,
            after=after,
        )
    return None


class Anticipator:
    """Barrier, standing prediction, steering, and the sensibility check."""

    def __init__(
        self,
        engine: BeatEngine,
        catalog,
        *,
        horizon: int = 6,
        lookahead: bool = True,
        interventions: bool = True,
        k_max: int = 2,
        barrier_timeout: int = 3,
    ):
        self.engine = engine
        self.catalog = list(catalog)
        self.horizon = horizon
        self.lookahead = lookahead
        self.interventions_enabled = interventions
        self.k_max = k_max
        self.barrier_timeout = barrier_timeout
        self.registered: list[str] = []
        self.prediction: Prediction | None = None
        self.log: list[tuple] = []  # (beat, kind, detail)
        self.interventions: list[Intervention] = []
        self.feed: list[str] = []  # beat<TAB>verdict<TAB>ids<TAB>writeset
        self._checked_in: set = set()
        self._stall = 0
        self._live: SystemState | None = None
        self._sensor = ConditionEvaluator(engine.scenario)

    # -- registration and barrier --------------------------------------------

    def register(self, agent_id: str) -> None:
        if agent_id not in self.registered:
            self.registered.append(agent_id)

    def bind(self, state: SystemState) -> None:
        self._live = state
        for agent in state.agents.values():
            self.register(agent.id)
            agent.observer = self.synchronize

    def synchronize(self, agent) -> None:
        """Observer hook: one check-in per agent per beat."""
        self._checked_in.add(agent.id)
        if set(self.registered) <= self._checked_in:
            self._barrier_complete()

    def barrier_poll(self, state: SystemState) -> None:
        """Called after the observer phase; detects missing check-ins."""
        if not self.registered:
            self._barrier_complete()  # an empty cast synchronizes trivially
            return
        missing = set(self.registered) - self._checked_in
        if not missing:
            return
        self._stall += 1
        if self._stall >= self.barrier_timeout:
            raise BarrierTimeoutError(missing)

    def _barrier_complete(self) -> None:
        self._checked_in = set()
        self._stall = 0
        state = self._live
        if state is None or not self.lookahead:
            return
        beat = state.beat
        if self.prediction is not None:
            if self.sensibility_check(self.prediction, state) == "discard":
                self.log.append((beat, "discard", "prediction diverged"))
                self.prediction = None
        if self.prediction is None or not self.prediction.covers(beat):
            snapshot = sysmod.capture(state)
            self.log.append((beat, "snapshot", f"{len(snapshot.agent_snaps)} agents"))
            self.prediction = simulate(self.engine, snapshot, self.horizon)
            self.log.append((beat, "predict", self.prediction.verdict))
            if self.prediction.verdict != VERDICT_OK:
                self._steer(state, snapshot)

    def _steer(self, state: SystemState, snapshot: SystemSnapshot) -> None:
        verdict = self.prediction.verdict
        if not self.interventions_enabled:
            self.feed.append(f"{state.beat}\t{verdict}\t-\t-")
            return
        found = search_effectors(
            self.engine, snapshot, self.prediction, self.catalog, self.k_max, self.horizon
        )
        if found is None:
            self.log.append((state.beat, "helpless", verdict))
            self.feed.append(f"{state.beat}\t{verdict}\t-\t-")
            return
        results = apply_intervention(found, state, self.engine.scenario)
        applied = Intervention(
            found.beat,
            found.effectors,
            found.candidates_evaluated,
            found.feasible,
            found.motivation,
            found.after,
            results=tuple(results),
        )
        self.interventions.append(applied)
        self.prediction = found.after
        ids = ",".join(applied.ids())
        writeset = ";".join(r.writeset() for r in results) or "-"
        self.log.append((state.beat, "intervene", ids))
        self.feed.append(f"{state.beat}\t{verdict}\t{ids}\t{writeset}")

    # -- sensibility ----------------------------------------------------------

    def sensibility_check(self, prediction: Prediction, state: SystemState) -> str:
        """Keep the standing prediction only while reality matches it."""
        beat = state.beat
        previous = prediction.entry_at(beat - 1)
        if previous is not None and previous.model_after != state.model.current:
            return "discard"
        upcoming = prediction.entry_at(beat)
        if upcoming is not None:
            watched = self.engine.watched_positions(state)
            if watched:
                self._sensor.begin_beat()
                for i in watched:
                    if self._sensor.evaluate(i, state) != upcoming.evals[i]:
                        return "discard"
        return "keep"


def apply_intervention(iv: Intervention, state: SystemState, scenario) -> list:
    """Apply a whole effector set atomically to the live system."""
    staged = []
    for effector in iv.effectors:
        writes, edits, commit = stage(effector, state, scenario)
        staged.append((writes, edits, commit))
    from .effectors import ApplyResult

    results = []
    for writes, edits, commit in staged:
        commit()
        results.append(ApplyResult(tuple(writes), tuple(edits)))
    return results
