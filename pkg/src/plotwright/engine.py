"""One beat of story execution, shared by live sessions and look-ahead.

A beat: deliver player input to world models, run every agent's observer,
run one interpreter step per agent, evaluate the condition registry once,
then fire one enabled model transition (if any) and swap scene direction
in and out of the agents. The same code path drives the live session and
the controller's forward simulation; only the input source and the observer
bindings differ.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import agents as ag
from .automaton import PlotAutomaton, choose_transition, enabled_transitions, step
from .conditions import ConditionEvaluator
from .errors import MalformedCommandError
from .fixedpoint import SCALE
from .scenario import Scenario, SceneSpec
from .system import SystemState


@dataclass(frozen=True)
class DialogMove:
    speaker: str
    move: str  # say | ask | tell | act
    content: str
    addressee: str | None = None  # None = active-scene agents (say) or all (act)
    args: tuple = ()


def convert_input(raw: str, scenario: Scenario) -> DialogMove:
    """Player line -> dialog move. `@Agent: text`, `/act verb args`, or bare text."""
    if not raw or not raw.strip():
        raise MalformedCommandError("empty input line")
    line = raw.strip()
    if line.startswith("@"):
        name, sep, text = line[1:].partition(":")
        name = name.strip()
        text = text.strip()
        if not sep or not text:
            raise MalformedCommandError(f"expected '@agent: text', got {raw!r}")
        if scenario.agent(name) is None:
            raise MalformedCommandError(f"no such character {name!r}")
        return DialogMove("player", "say", text, addressee=name)
    if line.startswith("/act"):
        parts = line.split()
        if len(parts) < 2:
            raise MalformedCommandError("usage: /act <verb> [args...]")
        return DialogMove("player", "act", parts[1], addressee=None, args=tuple(parts[2:]))
    if line.startswith("/"):
        raise MalformedCommandError(f"unknown command {line.split()[0]!r}")
    return DialogMove("player", "say", line, addressee=None)


# ---------------------------------------------------------------------------
# player policies


class PlayerPolicy:
    kind = "silence"

    def next_line(self, beat: int) -> str | None:
        return None


class SilencePolicy(PlayerPolicy):
    pass


class RandomPolicy(PlayerPolicy):
    """Each beat: stay quiet with probability one half, else a canned line."""

    kind = "random"

    def __init__(self, seed: int, lines):
        self.rng = random.Random(f"policy:{seed}")
        self.lines = list(lines)

    def next_line(self, beat: int) -> str | None:
        if not self.lines or self.rng.random() < 0.5:
            return None
        return self.lines[self.rng.randrange(len(self.lines))]


class ScriptedPolicy(PlayerPolicy):
    """Plays back a fixed list of lines, one per beat, then goes silent."""

    kind = "scripted"

    def __init__(self, lines):
        self.lines = list(lines)
        self.cursor = 0

    def next_line(self, beat: int) -> str | None:
        if self.cursor >= len(self.lines):
            return None
        line = self.lines[self.cursor]
        self.cursor += 1
        return line if line else None


def make_policy(kind: str, seed: int, scenario: Scenario, script=None) -> PlayerPolicy:
    if kind == "silence":
        return SilencePolicy()
    if kind == "random":
        return RandomPolicy(seed, scenario.moves)
    if kind == "scripted":
        return ScriptedPolicy(script or [])
    raise ValueError(f"unknown policy {kind!r}")


# ---------------------------------------------------------------------------
# beat engine


@dataclass
class BeatResult:
    beat: int
    events: list
    evals: tuple
    fired: str | None
    scene_changed: tuple | None  # (old scene, new scene)
    ended: bool
    dead: bool


class BeatEngine:
    def __init__(self, scenario: Scenario, automaton: PlotAutomaton, env: ag.AgentEnv | None = None):
        self.scenario = scenario
        self.automaton = automaton
        self.evaluator = ConditionEvaluator(scenario)
        self.env = env or default_env(scenario)

    def fork(self) -> "BeatEngine":
        """Engine twin with its own evaluator cache, for simulations."""
        return BeatEngine(self.scenario, self.automaton, self.env)

    # -- scene direction ------------------------------------------------------

    def activate_scene(self, state: SystemState, scene: SceneSpec) -> None:
        """Hand the scene's beat plans and goals to the cast."""
        for beat in scene.beats:
            agent = state.agents.get(beat.target_agent)
            if agent is None:
                continue
            origin = (scene.id, beat.id)
            for plan in beat.program.plans:
                agent.add_plan(ag.Plan(
                    plan.name, plan.goal_kind, plan.goal, plan.body,
                    plan.effects, plan.precondition, plan.utility, origin,
                ))
            for goal in beat.program.goals:
                agent.add_goal(ag.Goal(goal.kind, goal.name, goal.priority, origin))

    def deactivate_scene(self, state: SystemState, scene: SceneSpec) -> None:
        """Withdraw exactly what activation handed out."""
        for beat in scene.beats:
            agent = state.agents.get(beat.target_agent)
            if agent is None:
                continue
            origin = (scene.id, beat.id)
            agent.remove_plans(lambda p: p.origin == origin)
            agent.remove_goals(lambda g: g.origin == origin)

    # -- the beat -------------------------------------------------------------

    def deliver(self, state: SystemState, move: DialogMove) -> None:
        if move.move == "act":
            fact = ag.Fact(move.content, tuple(move.args) + (SCALE,))
            for agent in state.agents.values():
                agent.wm.assert_fact(fact)
            return
        fact = ag.Fact("heard", (move.speaker, move.content))
        if move.addressee is not None:
            agent = state.agents.get(move.addressee)
            if agent is not None:
                agent.wm.assert_fact(fact)
            return
        for agent in self._active_cast(state):
            agent.wm.assert_fact(fact)

    def _active_cast(self, state: SystemState):
        scene = self.scenario.scene(state.model.active_scene) if state.model.active_scene else None
        if scene and scene.beats:
            cast = [state.agents[b.target_agent] for b in scene.beats if b.target_agent in state.agents]
            if cast:
                return cast
        return list(state.agents.values())

    def run_beat(self, state: SystemState, moves, *, barrier_poll=None) -> BeatResult:
        """Advance the system by one beat."""
        self.evaluator.begin_beat()
        for move in moves:
            self.deliver(state, move)

        # phase A: observers (the controller's synchronization point)
        for agent in state.agents.values():
            ag.observe_phase(agent)
        if barrier_poll is not None:
            barrier_poll(state)

        # phase B: one interpreter step per agent, declaration order
        events = []
        for agent in state.agents.values():
            events.extend(ag.step_phase(agent, self.env))

        evals = self.evaluator.evaluate_all(state)

        fired = None
        scene_changed = None
        enabled = enabled_transitions(self.automaton, state.model, evals)
        if enabled:
            fired = choose_transition(enabled, state.model_rng)
            old_model = state.model
            state.model = step(self.automaton, old_model, fired)
            if state.model.active_scene != old_model.active_scene:
                old_scene = self.scenario.scene(old_model.active_scene) if old_model.active_scene else None
                new_scene = self.scenario.scene(state.model.active_scene) if state.model.active_scene else None
                if old_scene is not None:
                    self.deactivate_scene(state, old_scene)
                if new_scene is not None:
                    self.activate_scene(state, new_scene)
                scene_changed = (
                    old_model.active_scene,
                    state.model.active_scene,
                )

        beat = state.beat
        state.beat += 1
        current = state.model.current
        return BeatResult(
            beat=beat,
            events=events,
            evals=evals,
            fired=fired,
            scene_changed=scene_changed,
            ended=current in self.automaton.ends,
            dead=current == self.automaton.dead,
        )

    def watched_positions(self, state: SystemState) -> tuple:
        """Non-wildcard guard positions on transitions leaving the current state."""
        watched = set()
        for edge in self.automaton.authored_edges_from(state.model.current):
            for i, symbol in enumerate(edge.guard):
                if symbol != "?":
                    watched.add(i)
        return tuple(sorted(watched))


def default_env(scenario: Scenario) -> ag.AgentEnv:
    """Primitive registry covering every action the scenario's plans name."""
    env = ag.AgentEnv(strict=True)
    for name in ("say", "tell", "ask", "doIdle", "invite", "give"):
        env.register(name)
    for decl in scenario.agents:
        _register_actions(env, decl.program)
    for scene in scenario.scenes:
        for beat in scene.beats:
            _register_actions(env, beat.program)
    return env


def _register_actions(env: ag.AgentEnv, program: ag.AgentProgram) -> None:
    def walk(steps):
        for s in steps:
            if isinstance(s, ag.ActionStep):
                env.register(s.action)
            elif isinstance(s, ag.OrStep):
                for b in s.branches:
                    walk(b)

    for plan in program.plans:
        walk(plan.body)
        walk(plan.effects)


def build_system(scenario: Scenario, automaton: PlotAutomaton, seed: int) -> SystemState:
    """Fresh live system at the start scene, with direction handed out."""
    from .automaton import initial_state

    agents = {}
    for decl in scenario.agents:
        agents[decl.name] = ag.AgentState(decl.name, decl.program, seed)
    state = SystemState(
        agents=agents,
        globals={},
        model=initial_state(automaton),
        model_rng=random.Random(f"model:{seed}"),
        beat=0,
    )
    return state
