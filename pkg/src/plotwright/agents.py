"""Miniature BDI plan interpreter for artificial characters.

Each character owns a world model (ground facts), a plan library, a goal
list, and an intention structure. A character script looks like:

    GOALS:
      ACHIEVE live;
    FACTS:
      FACT friends "Lovisa" "Karin" 1;
    PLAN:
    {
    NAME:
      "live"
    GOAL:
      ACHIEVE live;
    BODY:
      FACT friends "Lovisa" "Karin" $strength;
      OR
      {
        TEST( > $strength 1);
        ACHIEVE gossip;
      }
      {
        EXECUTE doIdle;
      };
    }

Step grammar: FACT/RETRIEVE bind variables from the world model, TEST
compares bound values, ACHIEVE pushes a subgoal, PERFORM emits an observable
action, EXECUTE an internal one, ASSERT/RETRACT write the world model, and
OR takes the first block whose steps all succeed.

Scheduling quantum: one *effectful* step (world-model read/write or action)
per interpreter cycle. TEST evaluation, OR branching, plan selection, and
subgoal pushes piggyback on the same cycle; the observer hook runs before
each cycle. This keeps whole-system look-ahead cheap while matching the
"one step at a time, observer in between" execution discipline.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import DslSyntaxError, PrimitiveNotRegisteredError, UnboundVariableError
from .fixedpoint import fmt_num, is_num, parse_num

# world-model atoms are strings or tenths integers


# ---------------------------------------------------------------------------
# world model


@dataclass(frozen=True)
class Fact:
    """Ground fact. The last argument is the slot value, the rest the key."""

    predicate: str
    args: tuple

    def key(self) -> tuple:
        if not self.args:
            return (self.predicate,)
        return (self.predicate,) + tuple(self.args[:-1])

    def value(self):
        return self.args[-1] if self.args else True

    def render(self) -> str:
        parts = [self.predicate] + [render_atom(a) for a in self.args]
        return " ".join(parts)


def render_atom(atom) -> str:
    if is_num(atom):
        return fmt_num(atom)
    return f'"{atom}"'


class WorldModel:
    """Fact store with last-writer-wins per (predicate, key-args)."""

    def __init__(self, facts=()):
        self._facts: dict[tuple, Fact] = {}
        for f in facts:
            self.assert_fact(f)

    def assert_fact(self, fact: Fact) -> bool:
        """Upsert; returns True when the store actually changed."""
        key = fact.key()
        old = self._facts.get(key)
        if old is not None and old == fact:
            return False
        self._facts[key] = fact
        return True

    def retract(self, predicate: str, args: tuple) -> int:
        """Remove all facts matching the pattern; '*' and Var match anything."""
        doomed = [k for k, f in self._facts.items() if _matches(f, predicate, args)]
        for k in doomed:
            del self._facts[k]
        return len(doomed)

    def match(self, predicate: str, args: tuple) -> list[Fact]:
        found = [f for f in self._facts.values() if _matches(f, predicate, args)]
        found.sort(key=lambda f: f.key())
        return found

    def get_value(self, predicate: str, key_args: tuple):
        fact = self._facts.get((predicate,) + tuple(key_args))
        return fact.value() if fact else None

    def facts(self) -> list[Fact]:
        return sorted(self._facts.values(), key=lambda f: f.key())

    def copy(self) -> "WorldModel":
        wm = WorldModel()
        wm._facts = dict(self._facts)
        return wm

    def fingerprint(self) -> str:
        return ";".join(f.render() for f in self.facts())

    def __len__(self):
        return len(self._facts)


@dataclass(frozen=True)
class Var:
    name: str


WILDCARD = Var("*")


def _matches(fact: Fact, predicate: str, args: tuple) -> bool:
    if fact.predicate != predicate or len(fact.args) != len(args):
        return False
    for got, want in zip(fact.args, args):
        if isinstance(want, Var):
            continue
        if got != want:
            return False
    return True


# ---------------------------------------------------------------------------
# plan representation


@dataclass(frozen=True)
class FactStep:
    predicate: str
    args: tuple  # atoms and Vars; free Vars bind from the matched fact


@dataclass(frozen=True)
class TestStep:
    op: str  # > < >= <= == !=
    left: object
    right: object


@dataclass(frozen=True)
class AchieveStep:
    goal: str


@dataclass(frozen=True)
class ActionStep:
    kind: str  # PERFORM (observable) or EXECUTE (internal)
    action: str
    args: tuple


@dataclass(frozen=True)
class AssertStep:
    predicate: str
    args: tuple


@dataclass(frozen=True)
class RetractStep:
    predicate: str
    args: tuple


@dataclass(frozen=True)
class OrStep:
    branches: tuple  # tuple of tuples of steps


@dataclass(frozen=True)
class Plan:
    name: str
    goal_kind: str  # ACHIEVE | PERFORM
    goal: str
    body: tuple
    effects: tuple = ()
    precondition: tuple = ()
    utility: int = 0  # tenths
    origin: tuple | None = None  # (scene_id, beat_id) for injected plans


@dataclass(frozen=True)
class Goal:
    kind: str  # ACHIEVE | PERFORM
    name: str
    priority: int = 0  # tenths
    origin: tuple | None = None


@dataclass(frozen=True)
class AgentProgram:
    goals: tuple
    facts: tuple
    plans: tuple


# ---------------------------------------------------------------------------
# script parsing

_SECTIONS = {"GOALS", "FACTS", "PLAN"}
_PLAN_KEYS = {"NAME", "GOAL", "BODY", "EFFECTS", "PRECONDITION", "UTILITY"}
_OPS = {">", "<", ">=", "<=", "==", "!="}


@dataclass
class _Tok:
    kind: str  # word str num var op punct
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#" or text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_col = col
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise DslSyntaxError("unterminated string", line, start_col)
            toks.append(_Tok("str", "".join(buf), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if c == "$":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            if j == i + 1:
                raise DslSyntaxError("bare '$'", line, start_col)
            toks.append(_Tok("var", text[i + 1 : j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            toks.append(_Tok("num", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Tok("word", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in (">=", "<=", "==", "!="):
            toks.append(_Tok("op", two, line, start_col))
            i += 2
            col += 2
            continue
        if c in "><":
            toks.append(_Tok("op", c, line, start_col))
            i += 1
            col += 1
            continue
        if c in "{}();:*":
            toks.append(_Tok("punct", c, line, start_col))
            i += 1
            col += 1
            continue
        raise DslSyntaxError(f"unexpected character {c!r}", line, start_col)
    return toks


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is None:
            last = self.toks[-1] if self.toks else _Tok("", "", 1, 1)
            raise DslSyntaxError("unexpected end of script", last.line, last.col)
        self.pos += 1
        return tok

    def expect(self, text):
        tok = self.next()
        if tok.text != text:
            raise DslSyntaxError(f"expected {text!r}, got {tok.text!r}", tok.line, tok.col)
        return tok

    def term(self):
        tok = self.next()
        if tok.kind == "str":
            return tok.text
        if tok.kind == "num":
            try:
                return parse_num(tok.text)
            except ValueError as exc:
                raise DslSyntaxError(str(exc), tok.line, tok.col) from None
        if tok.kind == "var":
            return Var(tok.text)
        if tok.kind == "word":
            return tok.text
        if tok.text == "*":
            return WILDCARD
        raise DslSyntaxError(f"expected a term, got {tok.text!r}", tok.line, tok.col)

    def terms_until_semi(self):
        out = []
        while self.peek() and self.peek().text != ";":
            out.append(self.term())
        self.expect(";")
        return tuple(out)


def parse_agent_program(text: str) -> AgentProgram:
    """Parse a character script into goals, facts, and plans."""
    p = _Parser(_tokenize(text))
    goals, facts, plans = [], [], []
    while p.peek() is not None:
        tok = p.next()
        if tok.kind != "word" or tok.text not in _SECTIONS:
            raise DslSyntaxError(
                f"expected GOALS:, FACTS: or PLAN:, got {tok.text!r}", tok.line, tok.col
            )
        p.expect(":")
        if tok.text == "GOALS":
            while p.peek() and p.peek().text in ("ACHIEVE", "PERFORM"):
                kind = p.next().text
                name = p.next().text
                priority = 0
                if p.peek() and p.peek().text == "priority":
                    p.next()
                    numtok = p.next()
                    priority = parse_num(numtok.text)
                p.expect(";")
                goals.append(Goal(kind, name, priority))
        elif tok.text == "FACTS":
            while p.peek() and p.peek().text == "FACT":
                p.next()
                pred = p.next().text
                args = p.terms_until_semi()
                facts.append(Fact(pred, args))
        else:
            plans.append(_parse_plan(p))
    prog = AgentProgram(tuple(goals), tuple(facts), tuple(plans))
    _check_bindings(prog)
    return prog


def _parse_plan(p: _Parser) -> Plan:
    p.expect("{")
    name = None
    goal_kind = goal = None
    body: tuple = ()
    effects: tuple = ()
    precondition: tuple = ()
    utility = 0
    seen = set()
    while p.peek() and p.peek().text != "}":
        key = p.next()
        if key.text not in _PLAN_KEYS:
            raise DslSyntaxError(f"unknown plan section {key.text!r}", key.line, key.col)
        p.expect(":")
        seen.add(key.text)
        if key.text == "NAME":
            name = p.term()
        elif key.text == "GOAL":
            goal_kind = p.next().text
            if goal_kind not in ("ACHIEVE", "PERFORM"):
                raise DslSyntaxError("GOAL must be ACHIEVE or PERFORM", key.line, key.col)
            goal = p.next().text
            p.expect(";")
        elif key.text == "UTILITY":
            numtok = p.next()
            utility = parse_num(numtok.text)
            p.expect(";")
        else:
            steps = _parse_steps(p, stop={k + ":" for k in _PLAN_KEYS} | {"}"})
            if key.text == "BODY":
                body = steps
            elif key.text == "EFFECTS":
                effects = steps
            else:
                precondition = steps
    brace = p.expect("}")
    if "GOAL" not in seen:
        raise DslSyntaxError("plan missing GOAL section", brace.line, brace.col)
    if name is None:
        name = goal
    return Plan(name, goal_kind, goal, body, effects, precondition, utility)


def _parse_steps(p: _Parser, stop) -> tuple:
    steps = []
    while True:
        tok = p.peek()
        if tok is None or tok.text == "}" or (tok.text in _PLAN_KEYS and _next_is_colon(p)):
            break
        steps.append(_parse_step(p))
    return tuple(steps)


def _next_is_colon(p: _Parser) -> bool:
    nxt = p.toks[p.pos + 1] if p.pos + 1 < len(p.toks) else None
    return nxt is not None and nxt.text == ":"


def _parse_step(p: _Parser):
    tok = p.next()
    word = tok.text
    if word in ("FACT", "RETRIEVE"):
        pred = p.next().text
        return FactStep(pred, p.terms_until_semi())
    if word == "TEST":
        p.expect("(")
        op = p.next()
        if op.text not in _OPS:
            raise DslSyntaxError(f"bad comparison {op.text!r}", op.line, op.col)
        left = p.term()
        right = p.term()
        p.expect(")")
        p.expect(";")
        return TestStep(op.text, left, right)
    if word == "ACHIEVE":
        goal = p.next().text
        p.expect(";")
        return AchieveStep(goal)
    if word in ("PERFORM", "EXECUTE"):
        action = p.next().text
        return ActionStep(word, action, p.terms_until_semi())
    if word == "ASSERT":
        pred = p.next().text
        return AssertStep(pred, p.terms_until_semi())
    if word == "RETRACT":
        pred = p.next().text
        return RetractStep(pred, p.terms_until_semi())
    if word == "OR":
        branches = []
        while p.peek() and p.peek().text == "{":
            p.next()
            branches.append(_parse_steps(p, stop={"}"}))
            p.expect("}")
        if len(branches) < 2:
            raise DslSyntaxError("OR needs at least two blocks", tok.line, tok.col)
        p.expect(";")
        return OrStep(tuple(branches))
    raise DslSyntaxError(f"unknown step {word!r}", tok.line, tok.col)


def _check_bindings(prog: AgentProgram) -> None:
    """Every $variable must be bound by a FACT/RETRIEVE before any use."""
    for plan in prog.plans:
        bound = set()
        _walk_bindings(plan.precondition, bound, plan)
        _walk_bindings(plan.body, bound, plan)
        _walk_bindings(plan.effects, set(bound), plan)


def _walk_bindings(steps, bound, plan):
    for step in steps:
        if isinstance(step, FactStep):
            for a in step.args:
                if isinstance(a, Var) and a.name != "*":
                    bound.add(a.name)
        elif isinstance(step, TestStep):
            for side in (step.left, step.right):
                _require_bound(side, bound, plan)
        elif isinstance(step, (ActionStep, AssertStep, RetractStep)):
            for a in step.args:
                _require_bound(a, bound, plan)
        elif isinstance(step, OrStep):
            for branch in step.branches:
                _walk_bindings(branch, set(bound), plan)


def _require_bound(atom, bound, plan):
    if isinstance(atom, Var) and atom.name != "*" and atom.name not in bound:
        raise UnboundVariableError(
            f"${atom.name} used before binding in plan {plan.name!r}"
        )


def unparse_program(prog: AgentProgram, indent: str = "") -> str:
    """Canonical script text for a parsed program (round-trip safe)."""
    out = []
    if prog.goals:
        out.append(f"{indent}GOALS:")
        for g in prog.goals:
            pri = f" priority {fmt_num(g.priority)}" if g.priority else ""
            out.append(f"{indent}  {g.kind} {g.name}{pri};")
    if prog.facts:
        out.append(f"{indent}FACTS:")
        for f in prog.facts:
            out.append(f"{indent}  FACT {f.render()};")
    for plan in prog.plans:
        out.append(f"{indent}PLAN:")
        out.append(f"{indent}{{")
        out.append(f"{indent}NAME:")
        out.append(f'{indent}  "{plan.name}"')
        out.append(f"{indent}GOAL:")
        out.append(f"{indent}  {plan.goal_kind} {plan.goal};")
        if plan.utility:
            out.append(f"{indent}UTILITY:")
            out.append(f"{indent}  {fmt_num(plan.utility)};")
        if plan.precondition:
            out.append(f"{indent}PRECONDITION:")
            out.extend(_unparse_steps(plan.precondition, indent + "  "))
        out.append(f"{indent}BODY:")
        out.extend(_unparse_steps(plan.body, indent + "  "))
        if plan.effects:
            out.append(f"{indent}EFFECTS:")
            out.extend(_unparse_steps(plan.effects, indent + "  "))
        out.append(f"{indent}}}")
    return "\n".join(out)


def _unparse_steps(steps, indent):
    out = []
    for step in steps:
        if isinstance(step, FactStep):
            out.append(f"{indent}RETRIEVE {step.predicate} {_terms(step.args)};")
        elif isinstance(step, TestStep):
            out.append(f"{indent}TEST( {step.op} {_term(step.left)} {_term(step.right)});")
        elif isinstance(step, AchieveStep):
            out.append(f"{indent}ACHIEVE {step.goal};")
        elif isinstance(step, ActionStep):
            args = _terms(step.args)
            out.append(f"{indent}{step.kind} {step.action}{' ' + args if args else ''};")
        elif isinstance(step, AssertStep):
            out.append(f"{indent}ASSERT {step.predicate} {_terms(step.args)};")
        elif isinstance(step, RetractStep):
            out.append(f"{indent}RETRACT {step.predicate} {_terms(step.args)};")
        elif isinstance(step, OrStep):
            out.append(f"{indent}OR")
            for branch in step.branches:
                out.append(f"{indent}{{")
                out.extend(_unparse_steps(branch, indent + "  "))
                out.append(f"{indent}}}")
            out.append(f"{indent};")
    return out


def _term(atom) -> str:
    if isinstance(atom, Var):
        return "*" if atom.name == "*" else f"${atom.name}"
    return render_atom(atom)


def _terms(args) -> str:
    return " ".join(_term(a) for a in args)


# ---------------------------------------------------------------------------
# intention structure and interpreter


@dataclass
class _Cursor:
    steps: tuple
    index: int = 0

    def copy(self):
        return _Cursor(self.steps, self.index)


@dataclass
class _OrState:
    step: OrStep
    branch: int

    def copy(self):
        return _OrState(self.step, self.branch)


@dataclass
class Frame:
    plan: Plan
    goal: Goal
    bindings: dict
    stack: list  # of _Cursor / _OrState, innermost last

    def copy(self):
        return Frame(
            self.plan,
            self.goal,
            dict(self.bindings),
            [level.copy() for level in self.stack],
        )


class IntentionStructure:
    """Stack of committed plan instances; the top frame is the one executing."""

    def __init__(self):
        self.frames: list[Frame] = []

    def top(self):
        return self.frames[-1] if self.frames else None

    def copy(self):
        dup = IntentionStructure()
        dup.frames = [f.copy() for f in self.frames]
        return dup

    def drop_plans(self, names: set[str]) -> bool:
        """Abandon every frame (and everything stacked on it) using a plan."""
        for i, frame in enumerate(self.frames):
            if frame.plan.name in names:
                del self.frames[i:]
                return True
        return False


@dataclass
class Event:
    cycle: int
    agent: str
    kind: str  # PERFORM | EXECUTE
    action: str
    args: tuple

    def render(self) -> str:
        args = ",".join(fmt_num(a) if is_num(a) else str(a) for a in self.args)
        return f"{self.cycle}\t{self.agent}\t{self.kind}\t{self.action}({args})"


class AgentEnv:
    """Primitive action registry plus an event sink."""

    def __init__(self, strict: bool = False):
        self.primitives: dict[str, object] = {}
        self.strict = strict

    def register(self, name: str, handler=None):
        self.primitives[name] = handler or (lambda agent, args: None)

    def invoke(self, name: str, agent, args):
        handler = self.primitives.get(name)
        if handler is None:
            if self.strict:
                raise PrimitiveNotRegisteredError(name)
            return
        handler(agent, args)


class AgentState:
    """One character: world model, plan library, goals, intentions, rng."""

    def __init__(self, agent_id: str, program: AgentProgram | None = None, seed: int = 0):
        self.id = agent_id
        self.wm = WorldModel(program.facts if program else ())
        self.plans: list[Plan] = list(program.plans) if program else []
        self.goals: list[Goal] = list(program.goals) if program else []
        self.intention = IntentionStructure()
        self.rng = random.Random(f"{seed}:{agent_id}")
        self.observer = None  # hook(agent) invoked before each cycle
        self.cycle = 0
        self.achieved: list[str] = []

    # -- structure edits ----------------------------------------------------

    def add_plan(self, plan: Plan):
        self.plans.append(plan)

    def remove_plans(self, predicate) -> list[Plan]:
        doomed = [p for p in self.plans if predicate(p)]
        if doomed:
            names = {p.name for p in doomed}
            self.plans = [p for p in self.plans if p not in doomed]
            self.intention.drop_plans(names)
        return doomed

    def add_goal(self, goal: Goal):
        self.goals.append(goal)

    def remove_goals(self, predicate) -> list[Goal]:
        doomed = [g for g in self.goals if predicate(g)]
        self.goals = [g for g in self.goals if g not in doomed]
        return doomed

    # -- introspection -------------------------------------------------------

    def has_plan(self, name: str) -> bool:
        return any(p.name == name for p in self.plans)

    def has_goal(self, name: str) -> bool:
        if any(g.name == name for g in self.goals):
            return True
        return any(f.goal.name == name for f in self.intention.frames)

    def fingerprint(self) -> str:
        plans = ",".join(sorted(p.name for p in self.plans))
        goals = ",".join(f"{g.name}@{g.priority}" for g in self.goals)
        return f"{self.id}|{self.wm.fingerprint()}|{plans}|{goals}|{self.cycle}"


def parse_agent(text: str, agent_id: str = "agent", seed: int = 0) -> AgentState:
    """Build a live agent from script source."""
    return AgentState(agent_id, parse_agent_program(text), seed)


# -- plan selection ---------------------------------------------------------


def select_plan(agent: AgentState, goal: Goal) -> Plan | None:
    """Highest-utility applicable plan; declaration order breaks ties."""
    best = None
    for plan in agent.plans:
        if plan.goal != goal.name or plan.goal_kind != goal.kind:
            continue
        if not _applicable(agent, plan):
            continue
        if best is None or plan.utility > best.utility:
            best = plan
    return best


def _applicable(agent: AgentState, plan: Plan) -> bool:
    """Dry-run the PRECONDITION block plus the leading TEST/RETRIEVE prefix."""
    bindings: dict = {}
    for step in plan.precondition:
        if not _dry_step(agent, step, bindings):
            return False
    for step in plan.body:
        if isinstance(step, FactStep):
            if not _dry_step(agent, step, bindings):
                return False
        elif isinstance(step, TestStep):
            if not _eval_test(step, bindings):
                return False
        else:
            break
    return True


def _dry_step(agent, step, bindings) -> bool:
    if isinstance(step, FactStep):
        fact = _first_match(agent.wm, step, bindings)
        if fact is None:
            return False
        _bind(step, fact, bindings)
        return True
    if isinstance(step, TestStep):
        return _eval_test(step, bindings)
    return True


# -- cycle execution ---------------------------------------------------------


def observe_phase(agent: AgentState) -> None:
    if agent.observer is not None:
        agent.observer(agent)


def step_phase(agent: AgentState, env: AgentEnv) -> list[Event]:
    """Run free bookkeeping until exactly one effectful step executes."""
    events: list[Event] = []
    guard = 0
    selected_this_cycle = False
    while True:
        guard += 1
        if guard > 10_000:  # malformed plan protection
            break
        frame = agent.intention.top()
        if frame is None:
            if selected_this_cycle:
                break
            goal = _next_goal(agent)
            if goal is None:
                break
            plan = select_plan(agent, goal)
            if plan is None:
                break  # goal blocks; retried next cycle
            selected_this_cycle = True
            _push_frame(agent, plan, goal)
            continue
        outcome = _advance(agent, frame, env, events)
        if outcome == "consumed":
            _settle(agent)
            break
        if outcome == "idle":
            break
    agent.cycle += 1
    return events


def interpreter_cycle(agent: AgentState, env: AgentEnv) -> list[Event]:
    """Observer, then one step of the top intention."""
    observe_phase(agent)
    return step_phase(agent, env)


def _next_goal(agent: AgentState) -> Goal | None:
    pending = [g for g in agent.goals]
    if not pending:
        return None
    best = pending[0]
    for g in pending[1:]:
        if g.priority > best.priority:
            best = g
    return best


def _push_frame(agent: AgentState, plan: Plan, goal: Goal):
    frame = Frame(plan, goal, {}, [_Cursor(plan.body)])
    agent.intention.frames.append(frame)


def _advance(agent, frame, env, events) -> str:
    """Walk the top frame. Returns consumed | free | idle."""
    while True:
        level = frame.stack[-1] if frame.stack else None
        if level is None or (isinstance(level, _Cursor) and level.index >= len(level.steps)):
            if level is not None:
                frame.stack.pop()
                if frame.stack:
                    # finished an OR branch: the OR step succeeds
                    assert isinstance(frame.stack[-1], _OrState)
                    frame.stack.pop()
                    frame.stack[-1].index += 1
                    continue
            _complete_plan(agent, frame)
            return "free"
        if isinstance(level, _OrState):
            branch = level.step.branches[level.branch]
            frame.stack.append(_Cursor(branch))
            continue
        step = level.steps[level.index]
        if isinstance(step, TestStep):
            if _eval_test(step, frame.bindings):
                level.index += 1
                continue
            if not _fail_block(agent, frame):
                return "free"
            frame = agent.intention.top()
            continue
        if isinstance(step, OrStep):
            frame.stack.append(_OrState(step, 0))
            continue
        if isinstance(step, AchieveStep):
            goal = Goal("ACHIEVE", step.goal, frame.goal.priority)
            plan = select_plan(agent, goal)
            if plan is None:
                if not _fail_block(agent, frame):
                    return "free"
                frame = agent.intention.top()
                continue
            level.index += 1  # resumes past the subgoal once it completes
            _push_frame(agent, plan, goal)
            frame = agent.intention.top()
            continue
        # effectful steps consume the cycle
        if isinstance(step, FactStep):
            fact = _first_match(agent.wm, step, frame.bindings)
            if fact is None:
                _fail_block(agent, frame)
                return "consumed"
            _bind(step, fact, frame.bindings)
            level.index += 1
            return "consumed"
        if isinstance(step, ActionStep):
            args = _resolve_args(step.args, frame.bindings)
            events.append(Event(agent.cycle, agent.id, step.kind, step.action, args))
            env.invoke(step.action, agent, args)
            level.index += 1
            return "consumed"
        if isinstance(step, AssertStep):
            args = _resolve_args(step.args, frame.bindings)
            agent.wm.assert_fact(Fact(step.predicate, args))
            level.index += 1
            return "consumed"
        if isinstance(step, RetractStep):
            args = tuple(
                frame.bindings.get(a.name, a) if isinstance(a, Var) and a.name != "*" else a
                for a in step.args
            )
            agent.wm.retract(step.predicate, args)
            level.index += 1
            return "consumed"
        raise AssertionError(f"unhandled step {step!r}")


def _settle(agent: AgentState) -> None:
    """After a consuming step, pop any blocks/plans it completed."""
    while True:
        frame = agent.intention.top()
        if frame is None:
            return
        level = frame.stack[-1] if frame.stack else None
        if level is None:
            _complete_plan(agent, frame)
            continue
        if isinstance(level, _Cursor) and level.index >= len(level.steps):
            frame.stack.pop()
            if frame.stack:
                assert isinstance(frame.stack[-1], _OrState)
                frame.stack.pop()
                frame.stack[-1].index += 1
                continue
            _complete_plan(agent, frame)
            continue
        return


def _complete_plan(agent: AgentState, frame: Frame) -> None:
    """Apply EFFECTS, pop the frame, and resolve the satisfied goal."""
    for step in frame.plan.effects:
        if isinstance(step, AssertStep):
            agent.wm.assert_fact(Fact(step.predicate, _resolve_args(step.args, frame.bindings)))
        elif isinstance(step, RetractStep):
            args = tuple(
                frame.bindings.get(a.name, a) if isinstance(a, Var) and a.name != "*" else a
                for a in step.args
            )
            agent.wm.retract(step.predicate, args)
    agent.intention.frames.pop()
    agent.achieved.append(frame.goal.name)
    if not agent.intention.frames:
        # top-level goals are one-shot: satisfied goals leave the list
        agent.goals = [g for g in agent.goals if g is not frame.goal]


def _fail_block(agent: AgentState, frame: Frame) -> bool:
    """A step failed: try the next OR branch, else fail the plan.

    Returns True when execution can continue inside this agent's intention
    (another branch or the parent frame), False when the failure unwound
    everything.
    """
    while True:
        while frame.stack and isinstance(frame.stack[-1], _Cursor):
            frame.stack.pop()
        if frame.stack:
            orstate = frame.stack[-1]
            if orstate.branch + 1 < len(orstate.step.branches):
                orstate.branch += 1
                return True
            frame.stack.pop()  # OR exhausted: the OR step itself fails
            if frame.stack:
                continue
        # plan failed outright; a failed subgoal fails its parent's block too
        agent.intention.frames.pop()
        if not agent.intention.frames:
            return False
        frame = agent.intention.top()
        continue


def _first_match(wm: WorldModel, step: FactStep, bindings) -> Fact | None:
    pattern = tuple(
        bindings.get(a.name, a) if isinstance(a, Var) and a.name in bindings else a
        for a in step.args
    )
    found = wm.match(step.predicate, pattern)
    return found[0] if found else None


def _bind(step: FactStep, fact: Fact, bindings) -> None:
    for want, got in zip(step.args, fact.args):
        if isinstance(want, Var) and want.name != "*":
            bindings[want.name] = got


def _resolve_args(args, bindings) -> tuple:
    out = []
    for a in args:
        if isinstance(a, Var):
            if a.name == "*":
                raise UnboundVariableError("'*' is only meaningful in RETRACT patterns")
            if a.name not in bindings:
                raise UnboundVariableError(f"${a.name} unbound at execution time")
            out.append(bindings[a.name])
        else:
            out.append(a)
    return tuple(out)


def _eval_test(step: TestStep, bindings) -> bool:
    left = _resolve_value(step.left, bindings)
    right = _resolve_value(step.right, bindings)
    if step.op == "==":
        return left == right
    if step.op == "!=":
        return left != right
    if not (is_num(left) and is_num(right)):
        return False
    if step.op == ">":
        return left > right
    if step.op == "<":
        return left < right
    if step.op == ">=":
        return left >= right
    return left <= right


def _resolve_value(atom, bindings):
    if isinstance(atom, Var):
        if atom.name not in bindings:
            raise UnboundVariableError(f"${atom.name} unbound in TEST")
        return bindings[atom.name]
    return atom


# ---------------------------------------------------------------------------
# snapshot / restore


@dataclass
class Snapshot:
    """Deep, observer-free copy of an agent; safe to mutate independently."""

    agent_id: str
    facts: tuple
    plans: tuple
    goals: tuple
    frames: list
    rng_state: object
    cycle: int
    achieved: tuple


def snapshot(agent: AgentState) -> Snapshot:
    return Snapshot(
        agent_id=agent.id,
        facts=tuple(agent.wm.facts()),
        plans=tuple(agent.plans),
        goals=tuple(agent.goals),
        frames=[f.copy() for f in agent.intention.frames],
        rng_state=agent.rng.getstate(),
        cycle=agent.cycle,
        achieved=tuple(agent.achieved),
    )


def restore(snap: Snapshot) -> AgentState:
    agent = AgentState(snap.agent_id)
    agent.wm = WorldModel(snap.facts)
    agent.plans = list(snap.plans)
    agent.goals = list(snap.goals)
    agent.intention.frames = [f.copy() for f in snap.frames]
    agent.rng.setstate(snap.rng_state)
    agent.cycle = snap.cycle
    agent.achieved = list(snap.achieved)
    # goal identity matters for one-shot completion bookkeeping
    _relink_goals(agent)
    return agent


def _relink_goals(agent: AgentState) -> None:
    for frame in agent.intention.frames:
        for g in agent.goals:
            if g.name == frame.goal.name and g.kind == frame.goal.kind:
                frame.goal = g
                break


def assert_fact(agent: AgentState, fact: Fact) -> bool:
    """Last-writer-wins upsert into the agent's world model."""
    return agent.wm.assert_fact(fact)


def retract_fact(agent: AgentState, predicate: str, args: tuple) -> int:
    return agent.wm.retract(predicate, args)
