"""The steering actuator set: atomic parameter updates with costs.

Effectors are the only way the controller touches the live story. Each one
is a named, priced action; applying one yields the exact write set. Derived
story values are readouts over facts and are never written directly.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import agents as ag
from .errors import (
    AggregationUnresolvedError,
    NonNumericTargetError,
    TargetMissingError,
    WouldWriteDerivedValueError,
)
from .fixedpoint import SCALE, fmt_num, is_num, parse_num
from .scenario import EffectorSpec, ParamPath, Scenario, parse_path
from .system import SystemState, resolve_path, write_path

# price tags in tenths of a value unit; set_fact is priced by its distance
COST_REMOVE_PLAN = 30
COST_REPLACE_PLAN = 30
COST_GOAL = 20
COST_PLAYER_ACTION = 40
COST_CHARACTER = 60
COST_ALTER_TIME = 50
COST_TOPIC = 20
COST_DISRUPTION = 40
COST_HINT = 10


@dataclass(frozen=True)
class ParameterUpdate:
    target: str  # rendered parameter path
    old_value: object
    new_value: object

    def render(self) -> str:
        old = fmt_num(self.old_value) if is_num(self.old_value) else str(self.old_value)
        new = fmt_num(self.new_value) if is_num(self.new_value) else str(self.new_value)
        return f"{self.target}:{old}->{new}"


@dataclass(frozen=True)
class Effector:
    id: str
    kind: str  # causer | denier | delayer | substitution | hint
    action: str
    agent: str | None
    payload: tuple
    cost: int  # tenths


@dataclass(frozen=True)
class StoryValueReading:
    name: str
    current: int  # tenths, clamped to the declared range
    derived_from: tuple  # (path text, value) pairs that contributed


@dataclass(frozen=True)
class ApplyResult:
    updates: tuple  # of ParameterUpdate
    edits: tuple  # structural edits, rendered

    def writeset(self) -> str:
        parts = [u.render() for u in self.updates] + list(self.edits)
        return ";".join(parts)


# ---------------------------------------------------------------------------
# catalog


def builtin_catalog(scenario: Scenario) -> list[Effector]:
    """Scenario-declared effectors plus generics derived from agent structure.

    Generics are deliberately gentle: one-notch fact lowering, removal of
    plans that do not serve a declared top goal, and a blocking high-priority
    goal. Agent-free scenarios fall back to the global pair (time, hint).
    """
    catalog: list[Effector] = [_from_spec(e) for e in scenario.effectors]
    if not scenario.agents:
        catalog.append(Effector("auto:alter_time", "delayer", "alter_time", None, ("1",), COST_ALTER_TIME))
        catalog.append(Effector("auto:hint", "hint", "give_hint", None, ("look_around",), COST_HINT))
        return catalog

    generics: list[Effector] = []
    for decl in scenario.agents:
        top_goals = {g.name for g in decl.program.goals}
        for fact in decl.program.facts:
            value = fact.value()
            if not is_num(value) or value <= 0:
                continue
            path = ParamPath("fact", agent=decl.name, predicate=fact.predicate, key_args=fact.key()[1:])
            lowered = max(0, value - SCALE)
            generics.append(
                Effector(
                    f"auto:set:{path.render()}={fmt_num(lowered)}",
                    "denier",
                    "set_fact",
                    decl.name,
                    (path.render(), fmt_num(lowered)),
                    abs(value - lowered),
                )
            )
        for plan in decl.program.plans:
            if plan.goal in top_goals:
                continue  # removing a top goal's only servant lobotomizes the agent
            generics.append(
                Effector(
                    f"auto:rmplan:{decl.name}.{plan.name}",
                    "denier",
                    "remove_plan",
                    decl.name,
                    (decl.name, plan.name),
                    COST_REMOVE_PLAN,
                )
            )
        top_priority = max((g.priority for g in decl.program.goals), default=0)
        generics.append(
            Effector(
                f"auto:goal:{decl.name}.hold_back",
                "delayer",
                "add_goal",
                decl.name,
                (decl.name, "hold_back", fmt_num(top_priority + SCALE)),
                COST_GOAL,
            )
        )
    generics.sort(key=lambda e: (e.agent or "", e.action, e.id))
    return catalog + generics


def _from_spec(spec: EffectorSpec) -> Effector:
    agent = None
    if spec.action == "set_fact" and spec.args:
        try:
            agent = parse_path(spec.args[0]).agent
        except ValueError:
            agent = None
    elif spec.args and spec.action not in (
        "alter_time",
        "give_hint",
        "introduce_character",
        "remove_character",
    ):
        agent = spec.args[0]
    return Effector(spec.id, spec.kind, spec.action, agent, tuple(spec.args), spec.cost)


# ---------------------------------------------------------------------------
# application


def apply(effector: Effector, state: SystemState, scenario: Scenario) -> ApplyResult:
    """Apply one effector atomically; returns the exact write set.

    Validation happens before any mutation, so a failure never leaves a
    partial write behind.
    """
    writes, edits, commit = stage(effector, state, scenario)
    commit()
    return ApplyResult(tuple(writes), tuple(edits))


def stage(effector: Effector, state: SystemState, scenario: Scenario):
    action = effector.action
    args = effector.payload
    value_names = {v.name for v in scenario.story_values}

    if action == "set_fact":
        path_text, raw_value = args[0], args[1]
        if path_text.startswith("value.") or path_text in value_names:
            raise WouldWriteDerivedValueError(f"{path_text} is a derived story value")
        path = parse_path(path_text)
        if path.kind == "value":
            raise WouldWriteDerivedValueError(path_text)
        if path.kind == "fact" and path.agent not in state.agents:
            raise TargetMissingError(f"agent {path.agent!r} is not in the system")
        new_value = parse_num(raw_value) if _numeric(raw_value) else raw_value
        old_value = resolve_path(state, path)
        update = ParameterUpdate(path.render(), old_value, new_value)
        return [update], [], lambda: write_path(state, path, new_value)

    if action in ("remove_plan", "replace_plan"):
        agent = _need_agent(state, args[0])
        plan_name = args[1]
        if not agent.has_plan(plan_name):
            raise TargetMissingError(f"{agent.id} has no plan {plan_name!r}")
        if action == "remove_plan":
            edit = f"remove_plan {agent.id}.{plan_name}"
            return [], [edit], lambda: agent.remove_plans(lambda p: p.name == plan_name)

        idle_action = args[2] if len(args) > 2 else "doIdle"
        edit = f"replace_plan {agent.id}.{plan_name}->{idle_action}"

        def commit():
            old = [p for p in agent.plans if p.name == plan_name][0]
            agent.remove_plans(lambda p: p.name == plan_name)
            agent.add_plan(
                ag.Plan(plan_name, old.goal_kind, old.goal, (ag.ActionStep("EXECUTE", idle_action, ()),))
            )

        return [], [edit], commit

    if action == "add_goal":
        agent = _need_agent(state, args[0])
        goal_name, priority = args[1], parse_num(args[2]) if len(args) > 2 else 0
        edit = f"add_goal {agent.id}.{goal_name}@{fmt_num(priority)}"
        return [], [edit], lambda: agent.add_goal(ag.Goal("ACHIEVE", goal_name, priority))

    if action == "remove_goal":
        agent = _need_agent(state, args[0])
        goal_name = args[1]
        if not any(g.name == goal_name for g in agent.goals):
            raise TargetMissingError(f"{agent.id} has no goal {goal_name!r}")
        edit = f"remove_goal {agent.id}.{goal_name}"
        return [], [edit], lambda: agent.remove_goals(lambda g: g.name == goal_name)

    if action in ("simulate_player_action", "filter_player_action"):
        agent = _need_agent(state, args[0])
        predicate = args[1]
        key_args = tuple(args[2:])
        path = ParamPath("fact", agent=agent.id, predicate=predicate, key_args=key_args)
        new_value = SCALE if action == "simulate_player_action" else 0
        old_value = resolve_path(state, path)
        update = ParameterUpdate(path.render(), old_value, new_value)
        return [update], [], lambda: write_path(state, path, new_value)

    if action in ("introduce_character", "remove_character"):
        who = args[0]
        new_value = SCALE if action == "introduce_character" else 0
        updates = []
        for agent in state.agents.values():
            path = ParamPath("fact", agent=agent.id, predicate="present", key_args=(who,))
            updates.append(ParameterUpdate(path.render(), resolve_path(state, path), new_value))

        def commit():
            for agent in state.agents.values():
                agent.wm.assert_fact(ag.Fact("present", (who, new_value)))

        return updates, [f"{action} {who}"], commit

    if action == "alter_time":
        delta = parse_num(args[0]) if args else SCALE
        path = ParamPath("world", name="time_offset")
        old = state.globals.get("time_offset", 0)
        update = ParameterUpdate(path.render(), old, old + delta)
        return [update], [], lambda: state.globals.__setitem__("time_offset", old + delta)

    if action in ("start_topic", "stop_topic"):
        agent = _need_agent(state, args[0])
        topic = args[1]
        new_value = SCALE if action == "start_topic" else 0
        path = ParamPath("fact", agent=agent.id, predicate="topic", key_args=(topic,))
        update = ParameterUpdate(path.render(), resolve_path(state, path), new_value)
        return [update], [], lambda: write_path(state, path, new_value)

    if action == "disruptive_event":
        agent = _need_agent(state, args[0])
        emotion = args[1] if len(args) > 1 else "anger"
        path = ParamPath("fact", agent=agent.id, predicate="emotion", key_args=(emotion,))
        update = ParameterUpdate(path.render(), resolve_path(state, path), 7 * SCALE)
        return [update], [], lambda: write_path(state, path, 7 * SCALE)

    if action == "give_hint":
        text = args[0] if args else "hint"
        return [], [f"hint {text}"], lambda: None

    raise TargetMissingError(f"unknown effector action {action!r}")


def _need_agent(state: SystemState, name: str) -> ag.AgentState:
    agent = state.agents.get(name)
    if agent is None:
        raise TargetMissingError(f"agent {name!r} is not in the system")
    return agent


def _numeric(text: str) -> bool:
    try:
        parse_num(text)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# radical updates and magnitude


def is_radical(update: ParameterUpdate, threshold: int = 5) -> bool:
    """A single update moving a value by at least `threshold` whole units."""
    if not (is_num(update.old_value) and is_num(update.new_value)):
        raise NonNumericTargetError(update.target)
    return abs(update.new_value - update.old_value) >= threshold * SCALE


MAGNITUDES = ("parameter_update", "beat", "scene", "sequence", "act")


def classify_magnitude(updates, before, after) -> str:
    """Rank a write set by the total story-value movement it caused.

    `before`/`after` are StoryValueReading lists. Thresholds (in whole value
    units): 0 stays a bare parameter update, up to 2 is a beat, up to 4 a
    scene, up to 7 a sequence, beyond that an act.
    """
    if not updates:
        return "parameter_update"
    prior = {r.name: r.current for r in before}
    delta = 0
    for reading in after:
        delta += abs(reading.current - prior.get(reading.name, reading.current))
    if delta == 0:
        return "parameter_update"
    if delta <= 2 * SCALE:
        return "beat"
    if delta <= 4 * SCALE:
        return "scene"
    if delta < 8 * SCALE:
        return "sequence"
    return "act"


# ---------------------------------------------------------------------------
# derived story values


def derived_story_values(state: SystemState, scenario: Scenario) -> list[StoryValueReading]:
    """Recompute every declared story value from the current facts."""
    readings = []
    for spec in scenario.story_values:
        contributions = []
        for path in spec.aggregation.paths:
            if path.kind == "value":
                raise AggregationUnresolvedError(
                    f"story value {spec.name!r} cannot derive from another value"
                )
            value = resolve_path(state, path)
            if is_num(value):
                contributions.append((path.render(), value))
        if not contributions:
            current = spec.aggregation.default
        else:
            nums = [v for _, v in contributions]
            func = spec.aggregation.func
            if func == "min":
                current = min(nums)
            elif func == "max":
                current = max(nums)
            elif func == "sum":
                current = sum(nums)
            elif func == "avg":
                # round half up on tenths, so 4.5 stays exact and 10/3 -> 3.3
                total = sum(nums)
                current = (2 * total + len(nums)) // (2 * len(nums))
            else:
                current = nums[0]
        current = max(spec.lo, min(spec.hi, current))
        readings.append(StoryValueReading(spec.name, current, tuple(contributions)))
    return readings
