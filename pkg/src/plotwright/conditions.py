"""Evaluation of the guard condition registry against a live system.

Each condition is evaluated at most once per beat; results are memoized
until the evaluator is told a new beat started. The hit/miss counters exist
for the cache-discipline tests.
"""

from __future__ import annotations

from .errors import AggregationUnresolvedError
from .fixedpoint import is_num
from .scenario import ConditionSpec, Scenario
from .system import SystemState, resolve_path


class ConditionEvaluator:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self._cache: dict = {}
        self.eval_counts = [0] * len(scenario.conditions)

    def begin_beat(self) -> None:
        self._cache.clear()

    def evaluate_all(self, state: SystemState) -> tuple:
        return tuple(self.evaluate(c.index, state) for c in self.scenario.conditions)

    def evaluate(self, index: int, state: SystemState) -> bool:
        if index in self._cache:
            return self._cache[index]
        spec = self.scenario.conditions[index]
        result = self._compute(spec, state)
        self._cache[index] = result
        self.eval_counts[index] += 1
        return result

    def _compute(self, spec: ConditionSpec, state: SystemState) -> bool:
        kind = spec.kind
        if kind in ("Range", "Boolean", "Greater", "Less", "Equal"):
            value = self._read(spec, state)
            if kind == "Boolean":
                return bool(value) and value != 0
            if value is None:
                return False
            if kind == "Equal":
                return value == spec.equals
            if not is_num(value):
                return False
            if kind == "Range":
                return spec.lo <= value <= spec.hi
            if kind == "Greater":
                return value > spec.threshold
            return value < spec.threshold
        agent = state.agents.get(spec.agent)
        if agent is None:
            return False
        if kind == "HasGoal":
            return agent.has_goal(spec.pattern_predicate)
        if kind == "HasPlan":
            return agent.has_plan(spec.pattern_predicate)
        if kind == "Feels":
            value = agent.wm.get_value("emotion", spec.pattern_args)
            return is_num(value) and value > 0
        # Knows: any fact whose key starts with the given arguments
        for fact in agent.wm.facts():
            if fact.predicate != spec.pattern_predicate:
                continue
            key = fact.key()[1:]
            if key[: len(spec.pattern_args)] == spec.pattern_args:
                return True
        return False

    def _read(self, spec: ConditionSpec, state: SystemState):
        path = spec.path
        if path.kind == "value":
            from .effectors import derived_story_values

            for reading in derived_story_values(state, self.scenario):
                if reading.name == path.name:
                    return reading.current
            raise AggregationUnresolvedError(f"no story value named {path.name!r}")
        return resolve_path(state, path)
