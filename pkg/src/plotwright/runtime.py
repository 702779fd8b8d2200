"""Live story sessions: the beat loop, headless runs, and run reports."""

from __future__ import annotations

import time
from dataclasses import dataclass

from . import protocol
from .anticipator import Anticipator
from .automaton import compile_scenario
from .effectors import builtin_catalog, derived_story_values
from .engine import BeatEngine, PlayerPolicy, SilencePolicy, build_system, convert_input, make_policy
from .errors import MalformedCommandError
from .fixedpoint import fmt_num
from .scenario import Scenario
from .system import fingerprint


@dataclass
class RunReport:
    scenario: str
    seed: int
    trace: tuple  # fired transition names
    final_state: str
    ended_at_end: bool
    ended_dead: bool
    beats: int
    undesirable_entered: int
    undesirable_recovered: int
    unrecovered: bool  # finished inside the undesirable region
    interventions: tuple  # effector id tuples
    event_log: tuple
    wall_ms: float = 0.0

    def key(self):
        """Everything but wall time, for reproducibility comparisons."""
        return (
            self.scenario,
            self.seed,
            self.trace,
            self.final_state,
            self.ended_at_end,
            self.ended_dead,
            self.beats,
            self.undesirable_entered,
            self.undesirable_recovered,
            self.unrecovered,
            self.interventions,
            self.event_log,
        )

    def summary_line(self) -> str:
        return "\t".join(
            [
                str(self.seed),
                "".join(f"{t} " for t in self.trace).strip() or "-",
                self.final_state,
                "end" if self.ended_at_end else ("dead" if self.ended_dead else "stalled"),
                str(self.beats),
                f"{self.undesirable_entered}/{self.undesirable_recovered}",
                str(len(self.interventions)),
            ]
        )


class Session:
    """One live story: agents, model, controller, logs, frames."""

    def __init__(
        self,
        scenario: Scenario,
        *,
        seed: int = 0,
        policy: PlayerPolicy | None = None,
        anticipator: str = "on",  # on | off | watch (look-ahead, no steering)
        horizon: int = 6,
        max_beats: int = 60,
        debug: bool = False,
    ):
        self.scenario = scenario
        self.seed = seed
        self.policy = policy or SilencePolicy()
        self.max_beats = max_beats
        self.debug = debug
        self.automaton = compile_scenario(scenario)
        self.engine = BeatEngine(scenario, self.automaton)
        self.state = build_system(scenario, self.automaton, seed)
        start = scenario.start_scene()
        if start is not None:
            self.engine.activate_scene(self.state, start)
        self.anticipator: Anticipator | None = None
        if anticipator in ("on", "watch"):
            self.anticipator = Anticipator(
                self.engine,
                builtin_catalog(scenario),
                horizon=horizon,
                interventions=(anticipator == "on"),
            )
            self.anticipator.bind(self.state)
        self.trace: list[str] = []
        self.event_log: list[str] = []
        self.eval_log: list[tuple] = []
        self.undesirable_entered = 0
        self.undesirable_recovered = 0
        self._in_undesirable = False
        self._values = {}
        self._feed_cursor = 0
        self.finished = max_beats <= 0
        self.mode = "headless"

    # -- one beat -------------------------------------------------------------

    def tick(self, input_line: str | None = None) -> list:
        """Advance one beat; returns the frames this beat produced."""
        frames = []
        moves = []
        if input_line:
            try:
                moves.append(convert_input(input_line, self.scenario))
            except MalformedCommandError as exc:
                frames.append(protocol.frame("error", reason=str(exc)))
                input_line = None
        poll = self.anticipator.barrier_poll if self.anticipator else None
        result = self.engine.run_beat(self.state, moves, barrier_poll=poll)

        for event in result.events:
            self.event_log.append(event.render())
            if event.kind == "PERFORM":
                frames.append(
                    protocol.frame(
                        "utterance",
                        agent=event.agent,
                        action=event.action,
                        args=",".join(str(a) for a in event.args),
                        beat=result.beat,
                    )
                )
        self.eval_log.append(result.evals)
        if result.fired:
            self.trace.append(result.fired)
        if result.scene_changed:
            frames.append(
                protocol.frame(
                    "scene",
                    id=result.scene_changed[1] or "-",
                    previous=result.scene_changed[0] or "-",
                    beat=result.beat,
                )
            )
        for reading in derived_story_values(self.state, self.scenario):
            if self._values.get(reading.name) != reading.current:
                self._values[reading.name] = reading.current
                frames.append(
                    protocol.frame("value", name=reading.name, current=fmt_num(reading.current))
                )
        if self.debug and self.anticipator:
            while self._feed_cursor < len(self.anticipator.feed):
                line = self.anticipator.feed[self._feed_cursor]
                self._feed_cursor += 1
                beat, verdict, ids, writeset = line.split("\t")
                frames.append(
                    protocol.frame(
                        "intervention", beat=beat, verdict=verdict, effectors=ids, writeset=writeset
                    )
                )

        now_undesirable = (
            self.automaton.desirability.get(self.state.model.current) == "undesirable"
        )
        if now_undesirable and not self._in_undesirable:
            self.undesirable_entered += 1
        if self._in_undesirable and not now_undesirable:
            self.undesirable_recovered += 1
        self._in_undesirable = now_undesirable

        if result.ended or result.dead or self.state.beat >= self.max_beats:
            self.finished = True
        return frames

    # -- loops ----------------------------------------------------------------

    def run(self) -> RunReport:
        start = time.perf_counter()
        while not self.finished:
            line = self.policy.next_line(self.state.beat)
            self.tick(line)
        wall_ms = (time.perf_counter() - start) * 1000.0
        return self.report(wall_ms)

    def report(self, wall_ms: float = 0.0) -> RunReport:
        current = self.state.model.current
        ended_at_end = current in self.automaton.ends
        ended_dead = current == self.automaton.dead
        return RunReport(
            scenario=self.scenario.name,
            seed=self.seed,
            trace=tuple(self.trace),
            final_state=current,
            ended_at_end=ended_at_end,
            ended_dead=ended_dead,
            beats=self.state.beat,
            undesirable_entered=self.undesirable_entered,
            undesirable_recovered=self.undesirable_recovered,
            unrecovered=self._in_undesirable or ended_dead,
            interventions=tuple(
                iv.ids() for iv in (self.anticipator.interventions if self.anticipator else ())
            ),
            event_log=tuple(self.event_log),
            wall_ms=wall_ms,
        )

    def state_fingerprint(self) -> str:
        return fingerprint(self.state)

    # -- interactive protocol ---------------------------------------------------

    def hello_frames(self) -> list:
        frames = [
            protocol.frame(
                "hello", version=protocol.PROTOCOL_VERSION, scenario=self.scenario.name, seed=self.seed
            ),
            self.state_frame(),
        ]
        for reading in derived_story_values(self.state, self.scenario):
            self._values[reading.name] = reading.current
            frames.append(
                protocol.frame("value", name=reading.name, current=fmt_num(reading.current))
            )
        return frames

    def state_frame(self):
        return protocol.frame(
            "state",
            scene=self.state.model.active_scene or "-",
            beat=self.state.beat,
            played=",".join(sorted(self.state.model.played)) or "-",
            playable=",".join(sorted(self.automaton.playable_scenes(self.state.model))) or "-",
            finished="1" if self.finished else "0",
        )

    def handle_input(self, text: str) -> list:
        """One client input frame advances exactly one beat."""
        if self.finished:
            return [self.state_frame()]
        frames = self.tick(text if text.strip() else None)
        frames.append(self.state_frame())
        return frames


def run_headless(
    scenario: Scenario,
    *,
    policy: str = "silence",
    seed: int = 0,
    horizon: int = 6,
    anticipator: str = "on",
    max_beats: int = 60,
    script=None,
) -> RunReport:
    session = Session(
        scenario,
        seed=seed,
        policy=make_policy(policy, seed, scenario, script),
        anticipator=anticipator,
        horizon=horizon,
        max_beats=max_beats,
    )
    return session.run()
