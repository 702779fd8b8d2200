"""Search-cost comparison: exhaustive unfolding-tree expansion vs look-ahead.

Plot guidance by forward search explodes with scene count and depth; the
look-ahead controller replays a single trajectory per prediction, so its
cost is one beat of simulation per horizon beat. The bench makes both
measurable on a synthetic scenario.
"""

from __future__ import annotations

from dataclasses import dataclass

from .anticipator import simulate
from .automaton import compile_scenario
from .engine import BeatEngine, build_system
from .scenario import Scenario, parse_scenario
from .system import capture


def build_synthetic(n_scenes: int, branching: int = 3) -> Scenario:
    """A cyclic scene web with `branching` onward transitions per scene."""
    lines = [f"scenario synthetic{n_scenes} {{", "  condition 0 Boolean world.go"]
    for i in range(n_scenes):
        flags = "desirable start kernel" if i == 0 else "desirable kernel"
        lines.append(f"  scene s{i} {flags} {{ }}")
    for i in range(n_scenes):
        for j in range(1, branching + 1):
            target = (i + j) % n_scenes
            lines.append(f'  transition t{i}_{j} s{i} -> s{target} guard "?"')
    lines.append("}")
    result = parse_scenario("\n".join(lines))
    assert result.ok, [e.render() for e in result.errors]
    return result.scenario


def exhaustive_nodes(scenario: Scenario, depth: int) -> int:
    """Nodes expanded by full-width search of the unfolding tree."""
    automaton = compile_scenario(scenario)
    out_degree = {}
    for edge in automaton.edges:
        out_degree.setdefault(edge.source, []).append(edge.target)

    def expand(state: str, remaining: int) -> int:
        count = 1
        if remaining == 0:
            return count
        for target in out_degree.get(state, ()):
            count += expand(target, remaining - 1)
        return count

    return expand(automaton.start, depth)


def lookahead_beats(scenario: Scenario, horizon: int) -> int:
    """Beats actually simulated for one prediction at the given horizon."""
    automaton = compile_scenario(scenario)
    engine = BeatEngine(scenario, automaton)
    state = build_system(scenario, automaton, seed=0)
    prediction = simulate(engine, capture(state), horizon)
    return len(prediction.trajectory)


@dataclass(frozen=True)
class BenchReport:
    scenes: int
    branching: int
    exhaustive: tuple  # (depth, nodes)
    lookahead: tuple  # (horizon, beats)

    def render(self) -> str:
        lines = [f"synthetic scenario: {self.scenes} scenes, branching {self.branching}"]
        lines.append("exhaustive search:")
        for depth, nodes in self.exhaustive:
            lines.append(f"  depth {depth}\tnodes {nodes}")
        lines.append("look-ahead:")
        for horizon, beats in self.lookahead:
            lines.append(f"  horizon {horizon}\tbeats {beats}")
        return "\n".join(lines)


def run_bench(scenes: int, max_depth: int, branching: int = 3) -> BenchReport:
    scenario = build_synthetic(scenes, branching)
    exhaustive = tuple((d, exhaustive_nodes(scenario, d)) for d in range(max_depth + 1))
    lookahead = tuple((h, lookahead_beats(scenario, h)) for h in range(1, max_depth + 1))
    return BenchReport(scenes, branching, exhaustive, lookahead)
