"""The plot model: a finite automaton over transition names.

Scenes become states, authored transitions become symbols, and every
undefined (state, symbol) pair is completed into an absorbing dead state.
A transition carrying several guard strings is a string label: it expands
into a chain of synthetic states invisible to the author.

The runtime walks this automaton one enabled transition per beat; the
formal language (words = sequences of transition names ending in an end
state) is what minimization and the golden dumps operate on.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import (
    CompileError,
    IllegalTransitionError,
    NoEnabledTransitionError,
    NotDeterministicError,
    UnknownSymbolError,
)
from .scenario import Scenario, validate_scenario

DEAD = "⊥"  # the completion sink


@dataclass(frozen=True)
class Edge:
    source: str
    name: str
    guard: str  # one guard string; labels were already expanded
    target: str


@dataclass
class PlotAutomaton:
    states: frozenset
    alphabet: tuple
    delta: dict  # (state, symbol) -> frozenset of states; total after compile
    start: str
    ends: frozenset
    desirability: dict  # state -> 'desirable' | 'undesirable'
    provenance: dict  # state -> scene id | 'synthetic' | 'dead' | tuple of origins
    dead: str = DEAD
    edges: tuple = ()  # authored + expanded edges, with guards

    def successors(self, state: str, symbol: str) -> frozenset:
        return self.delta.get((state, symbol), frozenset())

    def is_deterministic(self) -> bool:
        return all(len(targets) <= 1 for targets in self.delta.values())

    def authored_edges_from(self, state: str) -> list:
        return [e for e in self.edges if e.source == state]

    def playable_scenes(self, m: ModelState) -> frozenset:
        """Scenes one authored transition away from the current state."""
        out = set()
        for e in self.authored_edges_from(m.current):
            prov = self.provenance.get(e.target)
            if isinstance(prov, str) and prov not in ("synthetic", "dead"):
                out.add(prov)
        return frozenset(out)


@dataclass(frozen=True)
class ModelState:
    current: str
    played: frozenset = frozenset()
    active_scene: str | None = None


def initial_state(a: PlotAutomaton) -> ModelState:
    scene = a.provenance.get(a.start)
    active = scene if isinstance(scene, str) and scene not in ("synthetic", "dead") else None
    return ModelState(a.start, frozenset(), active)


# ---------------------------------------------------------------------------
# compilation


def compile_scenario(s: Scenario) -> PlotAutomaton:
    """Build the complete automaton; lint errors abort compilation."""
    report = validate_scenario(s)
    if report.errors:
        raise CompileError(
            "scenario has lint errors: " + "; ".join(f.render() for f in report.errors)
        )
    start = s.start_scene()
    if start is None:
        raise CompileError("scenario has no start scene")

    states = {sc.id for sc in s.scenes}
    desirability = {sc.id: sc.desirability for sc in s.scenes}
    provenance: dict = {sc.id: sc.id for sc in s.scenes}
    ends = {sc.id for sc in s.scenes if sc.is_end}
    edges: list[Edge] = []
    alphabet: list[str] = []

    for t in s.transitions:
        if len(t.guards) == 1:
            alphabet.append(t.name)
            edges.append(Edge(t.source, t.name, t.guards[0], t.target))
            continue
        # string label: expand through fresh synthetic states
        hops = [t.source]
        for i in range(1, len(t.guards)):
            hop = f"{t.source}~{t.name}~{i}"
            states.add(hop)
            # synthetic states take on the disposition of the label's target
            desirability[hop] = desirability[t.target]
            provenance[hop] = "synthetic"
            hops.append(hop)
        hops.append(t.target)
        for i, guard in enumerate(t.guards):
            name = t.name if i == 0 else f"{t.name}~{i}"
            alphabet.append(name)
            edges.append(Edge(hops[i], name, guard, hops[i + 1]))

    states.add(DEAD)
    desirability[DEAD] = "undesirable"
    provenance[DEAD] = "dead"

    delta: dict = {}
    for e in edges:
        delta.setdefault((e.source, e.name), set()).add(e.target)
    for state in states:
        for sym in set(alphabet):
            if not delta.get((state, sym)):
                delta[(state, sym)] = {DEAD}
    frozen = {k: frozenset(v) for k, v in delta.items()}

    return PlotAutomaton(
        states=frozenset(states),
        alphabet=tuple(sorted(set(alphabet))),
        delta=frozen,
        start=start.id,
        ends=frozenset(ends),
        desirability=desirability,
        provenance=provenance,
        edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# acceptance and stepping


def accepts(a: PlotAutomaton, word) -> bool:
    """True iff some run over the word ends in an end state."""
    symbols = word.split() if isinstance(word, str) else list(word)
    for sym in symbols:
        if sym not in a.alphabet:
            raise UnknownSymbolError(f"unknown transition name {sym!r}")
    frontier = {a.start}
    for sym in symbols:
        frontier = {t for st in frontier for t in a.successors(st, sym)}
        if not frontier:
            return False
    return bool(frontier & a.ends)


def enabled_transitions(a: PlotAutomaton, m: ModelState, evals) -> list[str]:
    """Authored transitions from the current state whose guards match."""
    names = []
    for e in a.authored_edges_from(m.current):
        if guard_matches(e.guard, evals):
            names.append(e.name)
    return sorted(names)


def guard_matches(guard: str, evals) -> bool:
    if len(guard) != len(evals):
        raise ValueError(f"guard length {len(guard)} != eval vector length {len(evals)}")
    for symbol, truth in zip(guard, evals):
        if symbol == "?":
            continue
        if symbol == "1" and not truth:
            return False
        if symbol == "0" and truth:
            return False
    return True


def choose_transition(enabled, rng: random.Random) -> str:
    """Uniform seeded pick; the singleton case never consumes randomness."""
    candidates = sorted(enabled)
    if not candidates:
        raise NoEnabledTransitionError("no transition is enabled")
    if len(candidates) == 1:
        return candidates[0]
    return candidates[rng.randrange(len(candidates))]


def step(a: PlotAutomaton, m: ModelState, name: str) -> ModelState:
    """Follow one transition; the input ModelState is never mutated."""
    if name not in a.alphabet:
        raise IllegalTransitionError(f"{name!r} is not a transition of this model")
    targets = a.successors(m.current, name)
    if not targets:
        raise IllegalTransitionError(f"{name!r} does not leave {m.current!r}")
    target = sorted(targets)[0] if len(targets) > 1 else next(iter(targets))
    played = m.played
    prov = a.provenance.get(target)
    active = m.active_scene
    if m.active_scene is not None and target != m.current:
        leaving = a.provenance.get(m.current)
        if leaving == m.active_scene:
            played = played | {m.active_scene}
    if isinstance(prov, str) and prov not in ("synthetic", "dead"):
        active = prov
    return ModelState(target, played, active)


def reach_analysis(a: PlotAutomaton) -> dict:
    """Forward-reachable set from start; backward-reachable set from ends."""
    forward = {a.start}
    frontier = [a.start]
    while frontier:
        state = frontier.pop()
        for (src, _), targets in a.delta.items():
            if src != state:
                continue
            for t in targets:
                if t not in forward:
                    forward.add(t)
                    frontier.append(t)
    back: dict = {}
    for (src, _), targets in a.delta.items():
        for t in targets:
            back.setdefault(t, set()).add(src)
    end_reaching = set(a.ends)
    frontier = list(a.ends)
    while frontier:
        state = frontier.pop()
        for src in back.get(state, ()):
            if src not in end_reaching:
                end_reaching.add(src)
                frontier.append(src)
    return {"reachable": forward, "end_reaching": end_reaching}


# ---------------------------------------------------------------------------
# determinization and minimization
#
# Internally these work on a tiny multi-start NFA form. Minimization output
# is always a complete DFA: when the input has missing moves, the reject
# class appears as an explicit trap state, exactly as a table-filling
# construction over the completed automaton would produce.


@dataclass
class _Nfa:
    alphabet: tuple
    delta: dict  # state -> {symbol -> frozenset of states}
    starts: frozenset
    ends: frozenset


def _to_nfa(a: PlotAutomaton) -> _Nfa:
    delta: dict = {}
    for (src, sym), targets in a.delta.items():
        if targets:
            delta.setdefault(src, {})[sym] = frozenset(targets)
    return _Nfa(a.alphabet, delta, frozenset({a.start}), frozenset(a.ends))


def _rev_nfa(n: _Nfa) -> _Nfa:
    delta: dict = {}
    for src, moves in n.delta.items():
        for sym, targets in moves.items():
            for t in targets:
                delta.setdefault(t, {}).setdefault(sym, set()).add(src)
    frozen = {st: {sym: frozenset(v) for sym, v in moves.items()} for st, moves in delta.items()}
    return _Nfa(n.alphabet, frozen, frozenset(n.ends), frozenset(n.starts))


def _det_nfa(n: _Nfa) -> _Nfa:
    """Complete subset construction; the empty subset is the reject trap."""
    start = frozenset(n.starts)
    subsets = {start}
    worklist = [start]
    delta: dict = {}
    while worklist:
        subset = worklist.pop()
        moves = {}
        for sym in n.alphabet:
            target = frozenset(
                t for st in subset for t in n.delta.get(st, {}).get(sym, ())
            )
            moves[sym] = target
            if target not in subsets:
                subsets.add(target)
                worklist.append(target)
        delta[subset] = {sym: frozenset({t}) for sym, t in moves.items()}
    ends = frozenset(sub for sub in subsets if sub & n.ends)
    return _Nfa(n.alphabet, delta, frozenset({start}), ends)


def _rename_bfs(n: _Nfa) -> tuple:
    """Stable names m0, m1, ... in BFS order over sorted symbols."""
    start = next(iter(n.starts))
    names = {start: "m0"}
    order = [start]
    queue = [start]
    while queue:
        st = queue.pop(0)
        for sym in sorted(n.alphabet):
            for t in sorted(n.delta.get(st, {}).get(sym, ()), key=str):
                if t not in names:
                    names[t] = f"m{len(names)}"
                    order.append(t)
                    queue.append(t)
    return names, order


def determinize(a: PlotAutomaton) -> PlotAutomaton:
    """Subset construction; output is deterministic and complete."""
    det = _det_nfa(_to_nfa(a))
    name_of = {}
    for sub in det.delta:
        name_of[sub] = _subset_name(sub)
    delta = {}
    for sub, moves in det.delta.items():
        for sym, target_set in moves.items():
            target = next(iter(target_set))
            delta[(name_of[sub], sym)] = frozenset({name_of[target]})
    desirability = {}
    provenance = {}
    for sub in det.delta:
        name = name_of[sub]
        desirability[name] = (
            "undesirable"
            if any(a.desirability.get(st) == "undesirable" for st in sub)
            else "desirable"
        )
        provenance[name] = _merge_origins(a.provenance.get(st) for st in sub) or ("dead",)
    start = _subset_name(next(iter(det.starts)))
    ends = frozenset(name_of[sub] for sub in det.ends)
    return PlotAutomaton(
        states=frozenset(name_of.values()),
        alphabet=a.alphabet,
        delta=delta,
        start=start,
        ends=ends,
        desirability=desirability,
        provenance=provenance,
        dead=_subset_name(frozenset()) if frozenset() in det.delta else DEAD,
        edges=(),
    )


def _subset_name(subset: frozenset) -> str:
    return "{" + ",".join(sorted(str(s) for s in subset)) + "}"


def _merge_origins(origins) -> tuple:
    flat = []
    for o in origins:
        if o is None:
            continue
        if isinstance(o, tuple):
            flat.extend(o)
        else:
            flat.append(o)
    return tuple(sorted(set(flat)))


def minimize_hopcroft(a: PlotAutomaton) -> PlotAutomaton:
    """Hopcroft partition refinement; input must be deterministic.

    The initial partition separates end states from the rest and keeps the
    desirable/undesirable boundary intact, so a steering-relevant state never
    merges with an ordinary one. On metadata-free automata this degenerates
    to the classical final/non-final split.
    """
    if not a.is_deterministic():
        raise NotDeterministicError("hopcroft minimization needs a deterministic automaton")

    sink = "~tr~"
    states = sorted(a.states, key=str)
    total: dict = {}
    need_sink = False
    for st in states:
        for sym in a.alphabet:
            targets = a.successors(st, sym)
            if targets:
                total[(st, sym)] = next(iter(targets))
            else:
                total[(st, sym)] = sink
                need_sink = True
    if need_sink:
        states.append(sink)
        for sym in a.alphabet:
            total[(sink, sym)] = sink

    # only states reachable from the start participate
    reachable = {a.start}
    frontier = [a.start]
    while frontier:
        st = frontier.pop()
        for sym in a.alphabet:
            t = total.get((st, sym))
            if t is not None and t not in reachable:
                reachable.add(t)
                frontier.append(t)
    states = [st for st in states if st in reachable]

    def key(st):
        if st == sink:
            return (False, "desirable")
        return (st in a.ends, a.desirability.get(st, "desirable"))

    blocks: dict = {}
    for st in states:
        blocks.setdefault(key(st), set()).add(st)
    partition = [frozenset(b) for b in blocks.values()]
    worklist = list(partition)

    while worklist:
        splitter = worklist.pop()
        for sym in a.alphabet:
            sources = {st for st in states if total.get((st, sym)) in splitter}
            if not sources:
                continue
            next_partition = []
            for block in partition:
                inside = frozenset(block & sources)
                outside = frozenset(block - sources)
                if inside and outside:
                    next_partition.extend((inside, outside))
                    if block in worklist:
                        worklist.remove(block)
                        worklist.extend((inside, outside))
                    else:
                        worklist.append(inside if len(inside) <= len(outside) else outside)
                else:
                    next_partition.append(block)
            partition = next_partition

    return _quotient(a, partition, total, sink if need_sink else None)


def _quotient(a: PlotAutomaton, blocks, total, sink) -> PlotAutomaton:
    owner = {}
    names = {}
    for block in blocks:
        label = _subset_name(block)
        names[block] = label
        for st in block:
            owner[st] = label
    delta = {}
    for (src, sym), target in total.items():
        if src in owner and target in owner:
            delta[(owner[src], sym)] = frozenset({owner[target]})
    ends = frozenset(owner[st] for st in a.ends if st in owner)
    desirability = {}
    provenance = {}
    for block in blocks:
        label = names[block]
        members = block - {sink}
        desirability[label] = (
            "undesirable"
            if any(a.desirability.get(st) == "undesirable" for st in members)
            else "desirable"
        )
        provenance[label] = _merge_origins(a.provenance.get(st) for st in members) or ("dead",)
    return PlotAutomaton(
        states=frozenset(names.values()),
        alphabet=a.alphabet,
        delta=delta,
        start=owner[a.start],
        ends=ends,
        desirability=desirability,
        provenance=provenance,
        dead=owner.get(a.dead, owner.get(sink, DEAD)),
        edges=(),
    )


def minimize_brzozowski(a: PlotAutomaton) -> PlotAutomaton:
    """Double reversal-determinization; accepts nondeterministic input."""
    n = _to_nfa(a)
    minimal = _det_nfa(_rev_nfa(_det_nfa(_rev_nfa(n))))
    names, order = _rename_bfs(minimal)
    # states never reached from the start cannot occur in the subset walk,
    # so every state in `minimal.delta` has a name
    delta = {}
    for sub, moves in minimal.delta.items():
        if sub not in names:
            continue
        for sym, target_set in moves.items():
            target = next(iter(target_set))
            delta[(names[sub], sym)] = frozenset({names[target]})
    start = names[next(iter(minimal.starts))]
    ends = frozenset(names[sub] for sub in minimal.ends if sub in names)
    members = _project_members(a, minimal, names)
    desirability = {}
    provenance = {}
    dead_name = DEAD
    for sub, label in names.items():
        mem = members.get(label, set())
        desirability[label] = (
            "undesirable"
            if any(a.desirability.get(st) == "undesirable" for st in mem)
            else "desirable"
        )
        provenance[label] = _merge_origins(a.provenance.get(st) for st in mem) or ("dead",)
        if a.dead in mem:
            dead_name = label
    return PlotAutomaton(
        states=frozenset(names.values()),
        alphabet=a.alphabet,
        delta=delta,
        start=start,
        ends=ends,
        desirability=desirability,
        provenance=provenance,
        dead=dead_name,
        edges=(),
    )


def _project_members(a: PlotAutomaton, minimal: _Nfa, names) -> dict:
    """Walk the product of the input and its quotient to recover metadata."""
    start_m = next(iter(minimal.starts))
    members: dict = {}
    seen = {(a.start, start_m)}
    queue = [(a.start, start_m)]
    while queue:
        st, m = queue.pop()
        members.setdefault(names[m], set()).add(st)
        for sym in a.alphabet:
            m_next_set = minimal.delta.get(m, {}).get(sym, ())
            if not m_next_set:
                continue
            m_next = next(iter(m_next_set))
            for t in a.successors(st, sym):
                if (t, m_next) not in seen:
                    seen.add((t, m_next))
                    queue.append((t, m_next))
    return members


def minimize_for_report(a: PlotAutomaton, minimizer: str) -> PlotAutomaton:
    """Canonicalize a compiled automaton for dumps and stats.

    The pure Brzozowski quotient is language-minimal and may in principle
    merge across the desirable/undesirable boundary; the steering machinery
    needs that boundary intact, so such merges are rejected rather than
    silently accepted.
    """
    partitioned = minimize_hopcroft(determinize(a))
    if minimizer == "hopcroft":
        return partitioned
    if minimizer != "brzozowski":
        raise CompileError(f"unknown minimizer {minimizer!r}")
    quotient = minimize_brzozowski(a)
    if len(quotient.states) < len(partitioned.states):
        raise CompileError(
            "brzozowski minimization merged states across the desirable/"
            "undesirable boundary; use the hopcroft minimizer for this scenario"
        )
    return quotient


# ---------------------------------------------------------------------------
# dumps


def dump_automaton(a: PlotAutomaton) -> str:
    """Deterministic text dump: sorted states, then sorted moves."""
    lines = [f"start {a.start}"]
    for st in sorted(a.states, key=str):
        tags = []
        if st in a.ends:
            tags.append("end")
        tags.append(a.desirability.get(st, "desirable"))
        prov = a.provenance.get(st)
        if isinstance(prov, tuple):
            prov = "{" + ",".join(prov) + "}"
        lines.append(f"state {st} [{' '.join(tags)}] from={prov}")
    if a.edges:
        for e in sorted(a.edges, key=lambda e: (e.source, e.name)):
            lines.append(f"{e.source} --{e.name}/{e.guard}--> {e.target}")
    else:
        for (src, sym), targets in sorted(a.delta.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
            for t in sorted(targets, key=str):
                lines.append(f"{src} --{sym}--> {t}")
    return "\n".join(lines) + "\n"


def dump_dot(a: PlotAutomaton) -> str:
    """Graph description for visualization."""
    out = ["digraph plot {", "  rankdir=LR;"]
    for st in sorted(a.states, key=str):
        shape = "doublecircle" if st in a.ends else "circle"
        color = "" if a.desirability.get(st) != "undesirable" else ' style=filled fillcolor="#f4cccc"'
        out.append(f'  "{st}" [shape={shape}{color}];')
    out.append(f'  "" [shape=point];')
    out.append(f'  "" -> "{a.start}";')
    if a.edges:
        for e in sorted(a.edges, key=lambda e: (e.source, e.name)):
            out.append(f'  "{e.source}" -> "{e.target}" [label="{e.name}/{e.guard}"];')
    else:
        for (src, sym), targets in sorted(a.delta.items(), key=lambda kv: (str(kv[0][0]), kv[0][1])):
            for t in sorted(targets, key=str):
                out.append(f'  "{src}" -> "{t}" [label="{sym}"];')
    out.append("}")
    return "\n".join(out) + "\n"
