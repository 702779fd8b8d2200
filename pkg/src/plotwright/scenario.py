"""Authored-scenario data model, parser, lints, and serializer.

A scenario file (`.plot`) is a line-oriented block format:

    scenario <name> {
      constraint radical_threshold 5
      value <name> <lo>..<hi> poles "<low>/<high>" derive <expr>
      condition <idx> <Kind> <subject> [args]
      scene <id> [desirable|undesirable] [start] [end] [kernel|satellite]
                 [climactic] { beat <id> agent <a> { <plan script> } ... }
      transition <name> <from> -> <to> guard "<symbols>" ["<symbols>" ...]
      agent <name> { <plan script> }
      effector <id> <kind> <action> [args ...] cost <n>
      moves { "<canned player line>" ... }
    }

Guard strings are fixed-length words over {0,1,?}; position i names condition
i of the registry. Parsing is total: it never aborts mid-file and collects
every issue with its position.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import agents
from .errors import DslSyntaxError
from .fixedpoint import fmt_num, parse_num

CONDITION_KINDS = (
    "Range",
    "Boolean",
    "Greater",
    "Less",
    "Equal",
    "Knows",
    "Feels",
    "HasGoal",
    "HasPlan",
)

EFFECTOR_KINDS = ("causer", "denier", "delayer", "substitution", "hint")

EFFECTOR_ACTIONS = (
    "set_fact",
    "remove_plan",
    "replace_plan",
    "add_goal",
    "remove_goal",
    "simulate_player_action",
    "filter_player_action",
    "introduce_character",
    "remove_character",
    "alter_time",
    "start_topic",
    "stop_topic",
    "disruptive_event",
    "give_hint",
)


# ---------------------------------------------------------------------------
# parameter paths


@dataclass(frozen=True)
class ParamPath:
    """Addressable parameter: an agent fact slot, a story value, or a global.

    kind 'fact':  agent / predicate / key_args, addressing the value slot
    kind 'value': derived story value (read-only everywhere)
    kind 'world': global parameter
    """

    kind: str
    agent: str | None = None
    predicate: str | None = None
    key_args: tuple = ()
    name: str | None = None

    def render(self) -> str:
        if self.kind == "fact":
            args = ",".join(self.key_args)
            return f"{self.agent}.{self.predicate}({args})"
        return f"{self.kind}.{self.name}"


def parse_path(text: str) -> ParamPath:
    text = text.strip()
    if text.startswith("value."):
        return ParamPath("value", name=text[6:])
    if text.startswith("world."):
        return ParamPath("world", name=text[6:])
    head, _, rest = text.partition(".")
    if not rest or "(" not in rest or not rest.endswith(")"):
        raise ValueError(f"bad parameter path {text!r}")
    predicate, _, inner = rest[:-1].partition("(")
    key_args = tuple(a.strip() for a in inner.split(",") if a.strip())
    if not head or not predicate:
        raise ValueError(f"bad parameter path {text!r}")
    return ParamPath("fact", agent=head, predicate=predicate, key_args=key_args)


# ---------------------------------------------------------------------------
# spec dataclasses


@dataclass(frozen=True)
class AggregationSpec:
    func: str | None  # None (single path), min, max, avg, sum
    paths: tuple  # of ParamPath
    default: int  # tenths

    def render(self) -> str:
        if self.func:
            inner = ", ".join(p.render() for p in self.paths)
            body = f"{self.func}({inner})"
        else:
            body = self.paths[0].render()
        return f"{body} default {fmt_num(self.default)}"


@dataclass(frozen=True)
class StoryValueSpec:
    name: str
    lo: int  # tenths
    hi: int
    pole_low: str
    pole_high: str
    aggregation: AggregationSpec


@dataclass(frozen=True)
class ConditionSpec:
    index: int
    kind: str
    path: ParamPath | None = None  # Range/Boolean/Greater/Less/Equal
    agent: str | None = None  # Knows/Feels/HasGoal/HasPlan
    pattern_predicate: str | None = None
    pattern_args: tuple = ()
    lo: int | None = None
    hi: int | None = None
    threshold: int | None = None
    equals: object = None


@dataclass(frozen=True)
class BeatSpec:
    id: str
    target_agent: str
    program: agents.AgentProgram


@dataclass(frozen=True)
class SceneSpec:
    id: str
    desirability: str = "desirable"
    is_start: bool = False
    is_end: bool = False
    kind: str = "kernel"
    climactic: bool = False
    beats: tuple = ()


@dataclass(frozen=True)
class TransitionSpec:
    name: str
    source: str
    target: str
    guards: tuple  # one or more guard strings; >1 is a string label


@dataclass(frozen=True)
class EffectorSpec:
    id: str
    kind: str
    action: str
    args: tuple  # raw tokens, interpreted per action
    cost: int  # tenths


@dataclass(frozen=True)
class Constraints:
    oscillation: bool = True
    max_updates: int = 4
    radical_threshold: int = 5  # whole units on the 0..9 scale


@dataclass(frozen=True)
class AgentDecl:
    name: str
    program: agents.AgentProgram


@dataclass(frozen=True)
class Scenario:
    name: str
    story_values: tuple = ()
    conditions: tuple = ()
    scenes: tuple = ()
    transitions: tuple = ()
    agents: tuple = ()
    effectors: tuple = ()
    constraints: Constraints = Constraints()
    moves: tuple = ()  # canned player lines for the random policy

    def condition_count(self) -> int:
        return len(self.conditions)

    def scene(self, scene_id: str) -> SceneSpec | None:
        for s in self.scenes:
            if s.id == scene_id:
                return s
        return None

    def agent(self, name: str) -> AgentDecl | None:
        for a in self.agents:
            if a.name == name:
                return a
        return None

    def start_scene(self) -> SceneSpec | None:
        for s in self.scenes:
            if s.is_start:
                return s
        return None


# ---------------------------------------------------------------------------
# issues and reports


@dataclass(frozen=True)
class ParseIssue:
    code: str  # syntax | unresolved-reference | duplicate-name | guard-length-mismatch
    message: str
    line: int
    col: int

    def render(self) -> str:
        return f"{self.line}:{self.col}: {self.code}: {self.message}"


@dataclass(frozen=True)
class ParseResult:
    scenario: Scenario | None
    errors: tuple

    @property
    def ok(self) -> bool:
        return self.scenario is not None and not self.errors


@dataclass(frozen=True)
class LintFinding:
    code: str  # E1 E2 W1 W2 W3 W4
    severity: str  # error | warning
    subject: str
    message: str

    def render(self) -> str:
        return f"{self.code} [{self.severity}] {self.subject}: {self.message}"


@dataclass(frozen=True)
class LintReport:
    findings: tuple

    @property
    def errors(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "error")

    @property
    def warnings(self) -> tuple:
        return tuple(f for f in self.findings if f.severity == "warning")

    def codes(self) -> set:
        return {f.code for f in self.findings}


# ---------------------------------------------------------------------------
# tokenizer (block format)


@dataclass
class _Tok:
    kind: str  # word str num punct arrow range
    text: str
    line: int
    col: int


def _tokenize(text: str):
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
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = col
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
                toks.append(_Tok("error", "unterminated string", line, start))
                return toks
            toks.append(_Tok("str", "".join(buf), line, start))
            col += j + 1 - i
            i = j + 1
            continue
        if text.startswith("->", i):
            toks.append(_Tok("arrow", "->", line, start))
            i += 2
            col += 2
            continue
        if text.startswith("..", i):
            toks.append(_Tok("range", "..", line, start))
            i += 2
            col += 2
            continue
        if c in "{}":
            toks.append(_Tok("punct", c, line, start))
            i += 1
            col += 1
            continue
        # a bare word runs to whitespace or a brace (paths keep dots/parens)
        j = i
        while j < n and text[j] not in ' \t\r\n{}"#':
            if text.startswith("->", j) or text.startswith("..", j):
                break
            j += 1
        word = text[i:j]
        kind = "num" if _is_numeric(word) else "word"
        toks.append(_Tok(kind, word, line, start))
        col += j - i
        i = j
    return toks


def _is_numeric(word: str) -> bool:
    try:
        parse_num(word)
        return True
    except ValueError:
        return False


# ---------------------------------------------------------------------------
# parser


class _P:
    def __init__(self, toks, errors):
        self.toks = toks
        self.pos = 0
        self.errors = errors

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self):
        tok = self.peek()
        if tok is not None:
            self.pos += 1
        return tok

    def at_end(self):
        return self.pos >= len(self.toks)

    def error(self, code, message, tok=None):
        if tok is None:
            tok = self.toks[self.pos - 1] if self.pos > 0 and self.toks else None
        line = tok.line if tok else 1
        col = tok.col if tok else 1
        self.errors.append(ParseIssue(code, message, line, col))

    def expect_word(self, text):
        tok = self.next()
        if tok is None or tok.text != text:
            self.error("syntax", f"expected {text!r}" + (f", got {tok.text!r}" if tok else ""), tok)
            return None
        return tok

    def skip_block(self):
        """Consume a brace-balanced region after an error."""
        depth = 0
        while not self.at_end():
            tok = self.next()
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
                if depth <= 0:
                    return


def _collect_braced_source(text: str, open_index: int) -> tuple[str, int]:
    """Return the raw source inside a brace pair starting at open_index."""
    depth = 0
    i = open_index
    n = len(text)
    in_string = False
    while i < n:
        c = text[i]
        if in_string:
            if c == "\\":
                i += 2
                continue
            if c == '"':
                in_string = False
        elif c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return text[open_index + 1 : i], i + 1
        i += 1
    return text[open_index + 1 :], n


def parse_scenario(text: str) -> ParseResult:
    """Parse a scenario file; always returns, collecting every issue found."""
    errors: list[ParseIssue] = []
    toks = _tokenize(text)
    for t in toks:
        if t.kind == "error":
            errors.append(ParseIssue("syntax", t.text, t.line, t.col))
            return ParseResult(None, tuple(errors))
    p = _P(toks, errors)

    head = p.next()
    if head is None or head.text != "scenario":
        errors.append(ParseIssue("syntax", "expected 'scenario' header", 1, 1))
        return ParseResult(None, tuple(errors))
    name_tok = p.next()
    if name_tok is None or name_tok.kind != "word":
        p.error("syntax", "expected scenario name", name_tok)
        return ParseResult(None, tuple(errors))
    if p.expect_word("{") is None:
        return ParseResult(None, tuple(errors))

    values: list[StoryValueSpec] = []
    conditions: list[tuple[ConditionSpec, _Tok]] = []
    scenes: list[SceneSpec] = []
    transitions: list[tuple[TransitionSpec, _Tok]] = []
    agent_decls: list[AgentDecl] = []
    effectors: list[EffectorSpec] = []
    moves: list[str] = []
    constraints = Constraints()

    while not p.at_end():
        tok = p.next()
        if tok.text == "}":
            break
        if tok.text == "constraint":
            constraints = _parse_constraint(p, constraints)
        elif tok.text == "value":
            v = _parse_value(p)
            if v:
                values.append(v)
        elif tok.text == "condition":
            c = _parse_condition(p)
            if c:
                conditions.append((c, tok))
        elif tok.text == "scene":
            s = _parse_scene(p, text)
            if s:
                scenes.append(s)
        elif tok.text == "transition":
            t = _parse_transition(p)
            if t:
                transitions.append((t, tok))
        elif tok.text == "agent":
            a = _parse_agent_decl(p, text)
            if a:
                agent_decls.append(a)
        elif tok.text == "effector":
            e = _parse_effector(p)
            if e:
                effectors.append(e)
        elif tok.text == "moves":
            moves.extend(_parse_moves(p))
        else:
            p.error("syntax", f"unknown section {tok.text!r}", tok)
            if p.peek() is not None and p.peek().text == "{":
                p.skip_block()

    scenario = Scenario(
        name=name_tok.text,
        story_values=tuple(values),
        conditions=tuple(c for c, _ in conditions),
        scenes=tuple(scenes),
        transitions=tuple(t for t, _ in transitions),
        agents=tuple(agent_decls),
        effectors=tuple(effectors),
        constraints=constraints,
        moves=tuple(moves),
    )
    _resolve(scenario, conditions, transitions, errors)
    if errors:
        return ParseResult(None, tuple(errors))
    return ParseResult(scenario, ())


def _parse_constraint(p: _P, constraints: Constraints) -> Constraints:
    key = p.next()
    if key is None:
        p.error("syntax", "constraint needs a key")
        return constraints
    if key.text == "oscillation":
        flag = p.next()
        if flag is None or flag.text not in ("on", "off"):
            p.error("syntax", "oscillation expects on|off", flag)
            return constraints
        return replace(constraints, oscillation=flag.text == "on")
    if key.text in ("max_updates", "radical_threshold"):
        num = p.next()
        if num is None or num.kind != "num":
            p.error("syntax", f"{key.text} expects a number", num)
            return constraints
        value = int(parse_num(num.text) // 10)
        if key.text == "max_updates":
            return replace(constraints, max_updates=value)
        return replace(constraints, radical_threshold=value)
    p.error("syntax", f"unknown constraint {key.text!r}", key)
    return constraints


def _parse_value(p: _P) -> StoryValueSpec | None:
    name = p.next()
    rng_lo = p.next()
    if name is None or rng_lo is None or rng_lo.kind != "num":
        p.error("syntax", "value wants: name lo..hi poles \"a/b\" derive <expr>", name)
        return None
    if p.peek() is None or p.peek().kind != "range":
        p.error("syntax", "expected '..' in value range")
        return None
    p.next()
    rng_hi = p.next()
    if rng_hi is None or rng_hi.kind != "num":
        p.error("syntax", "value range needs an upper bound", rng_hi)
        return None
    if p.expect_word("poles") is None:
        return None
    poles = p.next()
    if poles is None or poles.kind != "str" or "/" not in poles.text:
        p.error("syntax", 'poles wants "<low>/<high>"', poles)
        return None
    low, _, high = poles.text.partition("/")
    if p.expect_word("derive") is None:
        return None
    agg = _parse_aggregation(p)
    if agg is None:
        return None
    lo, hi = parse_num(rng_lo.text), parse_num(rng_hi.text)
    if lo >= hi:
        p.error("syntax", f"value range must satisfy lo < hi, got {rng_lo.text}..{rng_hi.text}")
        return None
    return StoryValueSpec(name.text, lo, hi, low, high, agg)


def _parse_aggregation(p: _P) -> AggregationSpec | None:
    tok = p.next()
    if tok is None:
        p.error("syntax", "derive wants an expression")
        return None
    func = None
    paths: list[ParamPath] = []
    text = tok.text
    if text.split("(", 1)[0] in ("min", "max", "avg", "sum") and "(" in text:
        func = text.split("(", 1)[0]
        # the tokenizer splits on whitespace; reassemble until the paren closes
        inner = text.split("(", 1)[1]
        while inner.count("(") + 1 > inner.count(")") and p.peek() is not None:
            inner += " " + p.next().text
        if not inner.endswith(")"):
            p.error("syntax", "unterminated aggregation", tok)
            return None
        for part in _split_top_level(inner[:-1]):
            try:
                paths.append(parse_path(part))
            except ValueError as exc:
                p.error("syntax", str(exc), tok)
                return None
    else:
        try:
            paths.append(parse_path(text))
        except ValueError as exc:
            p.error("syntax", str(exc), tok)
            return None
    default = 0
    if p.peek() is not None and p.peek().text == "default":
        p.next()
        num = p.next()
        if num is None or num.kind != "num":
            p.error("syntax", "default wants a number", num)
            return None
        default = parse_num(num.text)
    return AggregationSpec(func, tuple(paths), default)


def _split_top_level(text: str) -> list[str]:
    """Split on commas that sit outside any parentheses."""
    parts, depth, buf = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    tail = "".join(buf).strip()
    if tail:
        parts.append(tail)
    return [p for p in parts if p]


def _parse_condition(p: _P) -> ConditionSpec | None:
    idx = p.next()
    kind = p.next()
    if idx is None or idx.kind != "num" or kind is None:
        p.error("syntax", "condition wants: <index> <Kind> <subject> [args]", idx)
        return None
    if kind.text not in CONDITION_KINDS:
        p.error("syntax", f"unknown condition kind {kind.text!r}", kind)
        return None
    index = int(parse_num(idx.text) // 10)
    subject = p.next()
    if subject is None:
        p.error("syntax", "condition needs a subject", kind)
        return None
    k = kind.text
    if k in ("Range", "Boolean", "Greater", "Less", "Equal"):
        try:
            path = parse_path(subject.text)
        except ValueError as exc:
            p.error("syntax", str(exc), subject)
            return None
        if k == "Boolean":
            return ConditionSpec(index, k, path=path)
        if k == "Range":
            lo, hi = p.next(), p.next()
            if lo is None or hi is None or lo.kind != "num" or hi.kind != "num":
                p.error("syntax", "Range wants lo hi", subject)
                return None
            return ConditionSpec(index, k, path=path, lo=parse_num(lo.text), hi=parse_num(hi.text))
        if k == "Equal":
            val = p.next()
            if val is None:
                p.error("syntax", "Equal wants a value", subject)
                return None
            equals = parse_num(val.text) if val.kind == "num" else val.text
            return ConditionSpec(index, k, path=path, equals=equals)
        thr = p.next()
        if thr is None or thr.kind != "num":
            p.error("syntax", f"{k} wants a numeric threshold", subject)
            return None
        return ConditionSpec(index, k, path=path, threshold=parse_num(thr.text))
    # agent-relative kinds
    agent = subject.text
    arg = p.next()
    if arg is None:
        p.error("syntax", f"{k} wants a pattern or name", subject)
        return None
    if k in ("HasGoal", "HasPlan"):
        return ConditionSpec(index, k, agent=agent, pattern_predicate=arg.text)
    if k == "Feels":
        return ConditionSpec(index, k, agent=agent, pattern_predicate="emotion", pattern_args=(arg.text,))
    # Knows: pattern like pred(a,b,c) matching key-args as a prefix
    text = arg.text
    if "(" in text and text.endswith(")"):
        pred, _, inner = text[:-1].partition("(")
        args = tuple(a.strip() for a in inner.split(",") if a.strip())
    else:
        pred, args = text, ()
    return ConditionSpec(index, k, agent=agent, pattern_predicate=pred, pattern_args=args)


_SCENE_FLAGS = {"desirable", "undesirable", "start", "end", "kernel", "satellite", "climactic"}


def _parse_scene(p: _P, source: str) -> SceneSpec | None:
    ident = p.next()
    if ident is None or ident.kind != "word":
        p.error("syntax", "scene wants an identifier", ident)
        return None
    desirability = "desirable"
    is_start = is_end = climactic = False
    kind = "kernel"
    beats: list[BeatSpec] = []
    while p.peek() is not None and p.peek().text in _SCENE_FLAGS:
        flag = p.next().text
        if flag in ("desirable", "undesirable"):
            desirability = flag
        elif flag == "start":
            is_start = True
        elif flag == "end":
            is_end = True
        elif flag in ("kernel", "satellite"):
            kind = flag
        else:
            climactic = True
    if p.peek() is not None and p.peek().text == "{":
        p.next()
        while p.peek() is not None and p.peek().text != "}":
            tok = p.next()
            if tok.text != "beat":
                p.error("syntax", f"expected beat or '}}', got {tok.text!r}", tok)
                p.skip_block()
                break
            beat = _parse_beat(p, source)
            if beat:
                beats.append(beat)
        if p.peek() is not None and p.peek().text == "}":
            p.next()
    return SceneSpec(ident.text, desirability, is_start, is_end, kind, climactic, tuple(beats))


def _parse_beat(p: _P, source: str) -> BeatSpec | None:
    ident = p.next()
    if ident is None:
        p.error("syntax", "beat wants an identifier")
        return None
    if p.expect_word("agent") is None:
        return None
    agent = p.next()
    if agent is None:
        p.error("syntax", "beat wants a target agent", ident)
        return None
    brace = p.peek()
    if brace is None or brace.text != "{":
        p.error("syntax", "beat wants a '{ script }' block", agent)
        return None
    program = _parse_embedded_program(p, source, brace)
    if program is None:
        return None
    return BeatSpec(ident.text, agent.text, program)


def _parse_agent_decl(p: _P, source: str) -> AgentDecl | None:
    name = p.next()
    if name is None or name.kind != "word":
        p.error("syntax", "agent wants a name", name)
        return None
    brace = p.peek()
    if brace is None or brace.text != "{":
        p.error("syntax", "agent wants a '{ script }' block", name)
        return None
    program = _parse_embedded_program(p, source, brace)
    if program is None:
        return None
    return AgentDecl(name.text, program)


def _parse_embedded_program(p: _P, source: str, brace: _Tok):
    # locate the brace in the raw text to hand the script parser exact source
    index = _offset_of(source, brace.line, brace.col)
    raw, end = _collect_braced_source(source, index)
    # fast-forward the token stream past the block
    p.skip_block()
    try:
        return agents.parse_agent_program(raw)
    except DslSyntaxError as exc:
        line = (exc.line or 1) + brace.line - 1
        p.errors.append(ParseIssue("syntax", f"script error: {exc}", line, exc.col or 1))
        return None


def _offset_of(text: str, line: int, col: int) -> int:
    cur = 1
    offset = 0
    for i, ch in enumerate(text):
        if cur == line:
            return i + (col - 1)
        if ch == "\n":
            cur += 1
    return len(text)


def _parse_transition(p: _P) -> TransitionSpec | None:
    name = p.next()
    src = p.next()
    if name is None or src is None:
        p.error("syntax", "transition wants: <name> <from> -> <to> guard \"..\"", name)
        return None
    if p.peek() is None or p.peek().kind != "arrow":
        p.error("syntax", "expected '->'", src)
        return None
    p.next()
    dst = p.next()
    if dst is None:
        p.error("syntax", "transition wants a target scene", src)
        return None
    if p.expect_word("guard") is None:
        return None
    guards: list[str] = []
    while p.peek() is not None and p.peek().kind == "str":
        guards.append(p.next().text)
    if not guards:
        p.error("syntax", f"transition {name.text} needs at least one guard string", dst)
        return None
    return TransitionSpec(name.text, src.text, dst.text, tuple(guards))


def _parse_effector(p: _P) -> EffectorSpec | None:
    ident = p.next()
    kind = p.next()
    action = p.next()
    if ident is None or kind is None or action is None:
        p.error("syntax", "effector wants: <id> <kind> <action> [args] cost <n>", ident)
        return None
    if kind.text not in EFFECTOR_KINDS:
        p.error("syntax", f"unknown effector kind {kind.text!r}", kind)
        return None
    if action.text not in EFFECTOR_ACTIONS:
        p.error("syntax", f"unknown effector action {action.text!r}", action)
        return None
    args: list[str] = []
    while p.peek() is not None and p.peek().text != "cost":
        tok = p.next()
        if tok.text in ("}",):
            p.error("syntax", f"effector {ident.text} is missing 'cost <n>'", tok)
            return None
        args.append(tok.text)
    if p.expect_word("cost") is None:
        return None
    num = p.next()
    if num is None or num.kind != "num":
        p.error("syntax", "cost wants a number", num)
        return None
    cost = parse_num(num.text)
    if cost <= 0:
        p.error("syntax", f"effector {ident.text} cost must be positive", num)
        return None
    return EffectorSpec(ident.text, kind.text, action.text, tuple(args), cost)


def _parse_moves(p: _P) -> list[str]:
    out: list[str] = []
    if p.peek() is None or p.peek().text != "{":
        p.error("syntax", "moves wants a '{ ... }' block")
        return out
    p.next()
    while p.peek() is not None and p.peek().text != "}":
        tok = p.next()
        if tok.kind != "str":
            p.error("syntax", "moves block holds quoted lines only", tok)
            return out
        out.append(tok.text)
    if p.peek() is not None:
        p.next()
    return out


# ---------------------------------------------------------------------------
# cross-resolution


def _resolve(scenario: Scenario, conditions, transitions, errors: list) -> None:
    scene_ids = [s.id for s in scenario.scenes]
    agent_names = [a.name for a in scenario.agents]
    value_names = [v.name for v in scenario.story_values]

    for label, names in (
        ("scene", scene_ids),
        ("agent", agent_names),
        ("value", value_names),
        ("transition", [t.name for t in scenario.transitions]),
        ("effector", [e.id for e in scenario.effectors]),
    ):
        seen = set()
        for n in names:
            if n in seen:
                errors.append(ParseIssue("duplicate-name", f"duplicate {label} {n!r}", 1, 1))
            seen.add(n)

    indices = sorted(c.index for c, _ in conditions)
    if indices != list(range(len(indices))):
        errors.append(
            ParseIssue("syntax", f"condition indices must be gapless 0..K-1, got {indices}", 1, 1)
        )
    k = len(conditions)

    for cond, tok in conditions:
        if cond.agent is not None and cond.agent not in agent_names:
            errors.append(
                ParseIssue("unresolved-reference", f"condition {cond.index} names unknown agent {cond.agent!r}", tok.line, tok.col)
            )
        if cond.path is not None:
            _check_path(cond.path, agent_names, value_names, errors, tok, f"condition {cond.index}")

    for value in scenario.story_values:
        for path in value.aggregation.paths:
            if path.kind == "value":
                errors.append(
                    ParseIssue("unresolved-reference", f"value {value.name!r} may not derive from another value", 1, 1)
                )
            elif path.kind == "fact" and path.agent not in agent_names:
                errors.append(
                    ParseIssue("unresolved-reference", f"value {value.name!r} references unknown agent {path.agent!r}", 1, 1)
                )

    for trans, tok in transitions:
        for endpoint in (trans.source, trans.target):
            if endpoint not in scene_ids:
                errors.append(
                    ParseIssue("unresolved-reference", f"transition {trans.name} references unknown scene {endpoint!r}", tok.line, tok.col)
                )
        for guard in trans.guards:
            bad = set(guard) - set("01?")
            if bad:
                errors.append(
                    ParseIssue("syntax", f"transition {trans.name} guard has invalid symbols {sorted(bad)}", tok.line, tok.col)
                )
            elif len(guard) != k:
                errors.append(
                    ParseIssue(
                        "guard-length-mismatch",
                        f"transition {trans.name}: expected guard length {k}, got {len(guard)}",
                        tok.line,
                        tok.col,
                    )
                )

    for scene in scenario.scenes:
        for beat in scene.beats:
            if beat.target_agent not in agent_names:
                errors.append(
                    ParseIssue("unresolved-reference", f"beat {scene.id}/{beat.id} targets unknown agent {beat.target_agent!r}", 1, 1)
                )


def _check_path(path: ParamPath, agent_names, value_names, errors, tok, who: str) -> None:
    if path.kind == "fact" and path.agent not in agent_names:
        errors.append(
            ParseIssue("unresolved-reference", f"{who} references unknown agent {path.agent!r}", tok.line, tok.col)
        )
    elif path.kind == "value" and path.name not in value_names:
        errors.append(
            ParseIssue("unresolved-reference", f"{who} references unknown value {path.name!r}", tok.line, tok.col)
        )


# ---------------------------------------------------------------------------
# lints


def validate_scenario(scenario: Scenario) -> LintReport:
    """Design lints over the authored scene graph."""
    findings: list[LintFinding] = []
    scenes = {s.id: s for s in scenario.scenes}
    out_edges: dict[str, list[TransitionSpec]] = {sid: [] for sid in scenes}
    for t in scenario.transitions:
        out_edges.setdefault(t.source, []).append(t)

    # E1: an undesirable state cannot be an end state
    for s in scenario.scenes:
        if s.is_end and s.desirability == "undesirable":
            findings.append(LintFinding("E1", "error", s.id, "undesirable scene marked as an end state"))

    # E2: exactly one start scene
    starts = [s.id for s in scenario.scenes if s.is_start]
    if len(starts) != 1:
        subject = ",".join(starts) if starts else "(none)"
        findings.append(LintFinding("E2", "error", subject, f"expected exactly one start scene, found {len(starts)}"))

    reach_end = _states_reaching(scenes, scenario.transitions, lambda s: s.is_end)
    reach_desirable = _states_reaching(scenes, scenario.transitions, lambda s: s.desirability == "desirable")

    for s in scenario.scenes:
        if s.desirability == "desirable" and not s.is_end and s.id not in reach_end:
            findings.append(LintFinding("W1", "warning", s.id, "desirable scene has no path to any end state"))
        if s.desirability == "undesirable":
            recovers = any(t.target in reach_desirable or scenes.get(t.target, s).desirability == "desirable" for t in out_edges.get(s.id, ()))
            if not recovers:
                findings.append(LintFinding("W2", "warning", s.id, "undesirable scene has no authored recovery path back to a desirable scene"))

    if scenario.constraints.oscillation:
        for t in scenario.transitions:
            src, dst = scenes.get(t.source), scenes.get(t.target)
            if (
                src
                and dst
                and scene_is_climactic(src, scenario)
                and scene_is_climactic(dst, scenario)
            ):
                findings.append(
                    LintFinding("W3", "warning", t.name, f"climactic scenes {src.id} and {dst.id} are adjacent")
                )

    max_updates = scenario.constraints.max_updates
    for t in scenario.transitions:
        demanded = sum(sum(1 for ch in g if ch != "?") for g in t.guards)
        if demanded > max_updates:
            findings.append(
                LintFinding("W4", "warning", t.name, f"satisfying this transition pins {demanded} conditions (max_updates={max_updates})")
            )

    return LintReport(tuple(findings))


def scene_is_climactic(scene: SceneSpec, scenario: Scenario) -> bool:
    """Author-flagged, or a beat visibly slams a value by the radical threshold.

    The static reading compares every literal numeric assert in the scene's
    beat scripts against the target agent's declared initial fact; a jump of
    at least the radical threshold marks the scene climactic.
    """
    if scene.climactic:
        return True
    threshold = scenario.constraints.radical_threshold * 10  # tenths
    for beat in scene.beats:
        decl = scenario.agent(beat.target_agent)
        if decl is None:
            continue
        initial = {f.key(): f.value() for f in decl.program.facts}
        for plan in beat.program.plans:
            for step in _flat_steps(plan.body) + _flat_steps(plan.effects):
                if not isinstance(step, agents.AssertStep):
                    continue
                if not step.args or any(isinstance(a, agents.Var) for a in step.args):
                    continue
                new_value = step.args[-1]
                if not isinstance(new_value, int) or isinstance(new_value, bool):
                    continue
                key = (step.predicate,) + tuple(step.args[:-1])
                old_value = initial.get(key)
                if isinstance(old_value, int) and abs(new_value - old_value) >= threshold:
                    return True
    return False


def _flat_steps(steps) -> list:
    out = []
    for step in steps:
        out.append(step)
        if isinstance(step, agents.OrStep):
            for branch in step.branches:
                out.extend(_flat_steps(branch))
    return out


def _states_reaching(scenes, transitions, predicate) -> set:
    """Scene ids with a path (possibly empty) to a scene satisfying predicate."""
    hits = {sid for sid, s in scenes.items() if predicate(s)}
    changed = True
    edges: dict[str, set] = {}
    for t in transitions:
        edges.setdefault(t.source, set()).add(t.target)
    while changed:
        changed = False
        for src, dsts in edges.items():
            if src not in hits and dsts & hits:
                hits.add(src)
                changed = True
    return hits


# ---------------------------------------------------------------------------
# serializer


def serialize_scenario(s: Scenario) -> str:
    """Canonical text for a scenario; parse(serialize(s)) == s."""
    out = [f"scenario {s.name} {{"]
    c = s.constraints
    defaults = Constraints()
    if c.oscillation != defaults.oscillation:
        out.append(f"  constraint oscillation {'on' if c.oscillation else 'off'}")
    if c.max_updates != defaults.max_updates:
        out.append(f"  constraint max_updates {c.max_updates}")
    if c.radical_threshold != defaults.radical_threshold:
        out.append(f"  constraint radical_threshold {c.radical_threshold}")
    for v in s.story_values:
        out.append(
            f'  value {v.name} {fmt_num(v.lo)}..{fmt_num(v.hi)} poles "{v.pole_low}/{v.pole_high}" derive {v.aggregation.render()}'
        )
    for cond in s.conditions:
        out.append(f"  condition {cond.index} {_render_condition(cond)}")
    for scene in s.scenes:
        out.append(_render_scene(scene))
    for t in s.transitions:
        guards = " ".join(f'"{g}"' for g in t.guards)
        out.append(f"  transition {t.name} {t.source} -> {t.target} guard {guards}")
    for a in s.agents:
        out.append(f"  agent {a.name} {{")
        out.append(agents.unparse_program(a.program, "    "))
        out.append("  }")
    for e in s.effectors:
        args = (" " + " ".join(e.args)) if e.args else ""
        out.append(f"  effector {e.id} {e.kind} {e.action}{args} cost {fmt_num(e.cost)}")
    if s.moves:
        out.append("  moves {")
        for m in s.moves:
            escaped = m.replace("\\", "\\\\").replace('"', '\\"')
            out.append(f'    "{escaped}"')
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


def _render_condition(c: ConditionSpec) -> str:
    if c.kind == "Boolean":
        return f"Boolean {c.path.render()}"
    if c.kind == "Range":
        return f"Range {c.path.render()} {fmt_num(c.lo)} {fmt_num(c.hi)}"
    if c.kind == "Greater":
        return f"Greater {c.path.render()} {fmt_num(c.threshold)}"
    if c.kind == "Less":
        return f"Less {c.path.render()} {fmt_num(c.threshold)}"
    if c.kind == "Equal":
        val = fmt_num(c.equals) if isinstance(c.equals, int) else c.equals
        return f"Equal {c.path.render()} {val}"
    if c.kind in ("HasGoal", "HasPlan"):
        return f"{c.kind} {c.agent} {c.pattern_predicate}"
    if c.kind == "Feels":
        return f"Feels {c.agent} {c.pattern_args[0]}"
    pattern = c.pattern_predicate
    if c.pattern_args:
        pattern += "(" + ",".join(c.pattern_args) + ")"
    return f"Knows {c.agent} {pattern}"


def _render_scene(s: SceneSpec) -> str:
    flags = []
    flags.append(s.desirability)
    if s.is_start:
        flags.append("start")
    if s.is_end:
        flags.append("end")
    flags.append(s.kind)
    if s.climactic:
        flags.append("climactic")
    head = f"  scene {s.id} {' '.join(flags)}"
    if not s.beats:
        return head + " { }"
    out = [head + " {"]
    for b in s.beats:
        out.append(f"    beat {b.id} agent {b.target_agent} {{")
        out.append(agents.unparse_program(b.program, "      "))
        out.append("    }")
    out.append("  }")
    return "\n".join(out)
