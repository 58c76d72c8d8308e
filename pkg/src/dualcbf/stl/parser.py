"""Recursive-descent parser for the STL fragment.

Grammar (whitespace insensitive)::

    spec     := group ('&&' group)*
    group    := temporal | '(' temporal ('||' temporal)+ ')'
    temporal := '!' temporal
              | OP interval [OP interval] inner
              | inner 'U' interval inner
    OP       := 'F' | 'G'
    interval := '[' num ',' num ']'
    inner    := conj ('|' conj)*
    conj     := unary ('&' unary)*
    unary    := '!' unary | '(' inner ')' | atom
    atom     := 'box' '(' var ',' num ',' num ')'
              | 'rect' '(' num ',' num ',' num ',' num ')'
              | 'circle' '(' var ',' var ',' num ',' num ',' num ')'
              | var ('>=' | '<=') num

The unicode connectives for and, or, not and the comparison signs are
accepted as aliases.  A single '&' or '|' in front of a temporal operator
reads as '&&' or '||'.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .normalize import Bounds, normalize
from .syntax import (
    And,
    FragmentError,
    InnerFormula,
    NegationError,
    Not,
    OpKind,
    Or,
    Predicate,
    SpecError,
    SpecSyntaxError,
    SpecTree,
    Subtask,
    TemporalOp,
    clause_set,
)

_ALIASES = {"∧": "&", "∨": "|", "¬": "!", "≥": ">=", "≤": "<="}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[-+]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>&&|\|\||>=|<=|[\[\](),&|!])
  | (?P<alias>[∧∨¬≥≤])
    """,
    re.VERBOSE,
)

_ARITY = {"box": 3, "rect": 4, "circle": 5}
_DUAL = {OpKind.F: OpKind.G, OpKind.G: OpKind.F, OpKind.FG: OpKind.GF, OpKind.GF: OpKind.FG}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok = m.group()
        if kind == "ws":
            for i, ch in enumerate(tok):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            if kind == "alias":
                kind, tok = "op", _ALIASES[tok]
            out.append(Token(kind, tok, line, pos - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


@dataclass
class _Temporal:
    kind: OpKind
    times: tuple[float, ...]
    inner: object
    left: object = None
    tok: Token | None = None


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "ident") and t.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def error(self, msg: str, tok: Token | None = None, cls=SpecSyntaxError):
        tok = tok or self.peek()
        return cls(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.peek().text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        self.i += 1
        return self.toks[self.i - 1]

    def number(self) -> float:
        t = self.peek()
        if t.kind != "num":
            raise self.error(f"expected a number, found '{t.text or 'end of input'}'")
        self.i += 1
        return float(t.text)

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in ("F", "G", "U"):
            raise self.error(f"expected a variable name, found '{t.text or 'end of input'}'")
        self.i += 1
        return t.text

    def at_temporal(self, k: int = 0) -> bool:
        return any(self.at(op, k) for op in ("F", "G")) and self.at("[", k + 1)

    # grammar
    def spec(self) -> list[list[_Temporal]]:
        groups = [self.group()]
        while self.accept("&&") or self._connective("&"):
            groups.append(self.group())
        if self.peek().kind != "eof":
            raise self.error(f"unexpected '{self.peek().text}'")
        return groups

    def group(self) -> list[_Temporal]:
        if self.at("("):
            start = self.i
            self.i += 1
            try:
                first = self.temporal()
            except SpecError:
                first = None
            if first is not None and (self.at("||") or (self.at("|") and self._temporal_ahead(1))):
                members = [first]
                while self.accept("||") or self._connective("|"):
                    members.append(self.temporal())
                self.expect(")")
                return members
            if first is not None and self.at(")") and not self.at("U", 1) and not self.at("&", 1) and not self.at("|", 1):
                self.i += 1
                return [first]
            self.i = start
        return [self.temporal()]

    def interval(self) -> tuple[float, float]:
        self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        return a, b

    def temporal(self) -> _Temporal:
        tok = self.peek()
        if self.at("!") and not self._negated_inner_ahead():
            self.i += 1
            t = self.temporal()
            if t.kind is OpKind.U:
                raise self.error("negated Until is outside the supported fragment", tok, NegationError)
            return _Temporal(_DUAL[t.kind], t.times, Not(t.inner), tok=tok)
        if self.at_temporal():
            outer = self.peek().text
            self.i += 1
            a, b = self.interval()
            if self.at_temporal():
                inner_tok = self.peek()
                second = inner_tok.text
                self.i += 1
                c, d = self.interval()
                if second == outer:
                    raise self.error(f"nested {outer}{second} is outside the supported fragment", inner_tok, FragmentError)
                if self.at_temporal():
                    raise self.error("more than two nested temporal operators", cls=FragmentError)
                body = self.inner()
                return _Temporal(OpKind(outer + second), (a, b, c, d), body, tok=tok)
            body = self.inner()
            return _Temporal(OpKind(outer), (a, b), body, tok=tok)
        left = self.inner()
        if not self.accept("U"):
            raise self.error("a predicate must sit under a temporal operator", tok, FragmentError)
        a, b = self.interval()
        right = self.inner()
        return _Temporal(OpKind.U, (a, b), right, left, tok=tok)

    def _negated_inner_ahead(self) -> bool:
        # '!' followed by a predicate means the whole thing is an Until left side
        k = 0
        while self.at("!", k):
            k += 1
        return not self.at_temporal(k)

    def _temporal_ahead(self, k: int) -> bool:
        while self.at("!", k) or self.at("(", k):
            k += 1
        return self.at_temporal(k)

    def _connective(self, op: str) -> bool:
        # a single '&' or '|' joins subtasks when a temporal operator follows
        if self.at(op) and self._temporal_ahead(1):
            self.i += 1
            return True
        return False

    def inner(self):
        parts = [self.conj()]
        while not self._temporal_ahead(1) and self.accept("|"):
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(parts)

    def conj(self):
        parts = [self.unary()]
        while not self._temporal_ahead(1) and self.accept("&"):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(parts)

    def unary(self):
        if self.accept("!"):
            return Not(self.unary())
        if self.at_temporal() or self.at("U"):
            raise self.error("temporal operators cannot appear inside a Boolean formula", cls=FragmentError)
        if self.accept("("):
            f = self.inner()
            self.expect(")")
            return f
        return self.atom()

    def atom(self) -> Predicate:
        t = self.peek()
        if t.kind == "ident" and t.text in _ARITY and self.at("(", 1):
            self.i += 2
            if t.text == "box":
                v = self.ident()
                self.expect(",")
                lo = self.number()
                self.expect(",")
                hi = self.number()
                self.expect(")")
                return self._checked(Predicate("box", (v,), (lo, hi)), t)
            if t.text == "circle":
                vx = self.ident()
                self.expect(",")
                vy = self.ident()
                nums = []
                for _ in range(3):
                    self.expect(",")
                    nums.append(self.number())
                self.expect(")")
                if vx == vy:
                    raise self.error("circle needs two distinct variables", t, SpecError)
                return self._checked(Predicate("circle", (vx, vy), tuple(nums)), t)
            nums = [self.number()]
            for _ in range(3):
                self.expect(",")
                nums.append(self.number())
            self.expect(")")
            return self._checked(Predicate("rect", ("x", "y"), tuple(nums)), t)
        v = self.ident()
        if self.accept(">="):
            return Predicate("ge", (v,), (self.number(),))
        if self.accept("<="):
            return Predicate("le", (v,), (self.number(),))
        raise self.error(f"expected '>=' or '<=' after '{v}'")

    def _checked(self, p: Predicate, tok: Token) -> Predicate:
        from .syntax import EmptySetError

        if p.kind == "circle" and not p.params[2] > 0:
            raise self.error(f"{p}: radius must be positive", tok, EmptySetError)
        if p.kind == "box" and not p.params[0] < p.params[1]:
            raise self.error(f"{p}: empty interval", tok, EmptySetError)
        if p.kind == "rect" and not (p.params[0] < p.params[1] and p.params[2] < p.params[3]):
            raise self.error(f"{p}: empty rectangle", tok, EmptySetError)
        return p


def _variables(groups) -> tuple[str, ...]:
    names = set()
    for g in groups:
        for s in g:
            for f in (s.inner, s.left_inner):
                if f is not None:
                    for p in f.predicates():
                        names.update(p.vars)
    return tuple(sorted(names))


def parse_spec(text: str, bounds: Bounds | None = None, variables: tuple[str, ...] | None = None) -> SpecTree:
    """Parse, normalise and validate a specification.

    ``bounds`` maps variable names to a bounding interval and is only needed
    when a box is negated.  ``variables`` fixes the state ordering; by default
    it is the sorted set of names that occur in the text.
    """
    raw_groups = _Parser(text).spec()
    groups, next_id = [], 1
    for raw in raw_groups:
        members = []
        for t in raw:
            try:
                inner = normalize(t.inner, bounds)
                left = normalize(t.left, bounds) if t.left is not None else None
                op = TemporalOp(t.kind, *t.times)
            except SpecError as exc:
                if exc.line is None and t.tok is not None:
                    raise type(exc)(exc.message, t.tok.line, t.tok.col) from None
                raise
            members.append(Subtask(next_id, op, inner, left))
            next_id += 1
        groups.append(tuple(members))
    names = _variables(groups)
    if variables is None:
        variables = names
    else:
        variables = tuple(variables)
        missing = set(names) - set(variables)
        if missing:
            raise SpecError(f"variables {sorted(missing)} are not in the state ordering {variables}")
    if any(s.inner and any(p.kind == "rect" for p in s.inner.predicates()) for g in groups for s in g):
        if not {"x", "y"} <= set(variables):
            raise SpecError("rect needs state variables x and y")
    bound = tuple(tuple(s.bind(variables) for s in g) for g in groups)
    tree = SpecTree(bound, variables)
    validate(tree)
    return tree


def validate(tree: SpecTree) -> None:
    """Every clause must describe a single nonempty compact set."""
    for s in tree.subtasks():
        for f in (s.inner, s.left_inner):
            if f is None:
                continue
            for clause in f.clauses:
                clause_set(clause)


def parse_inner(text: str, bounds: Bounds | None = None) -> InnerFormula:
    """Parse a bare Boolean formula over predicates (no temporal operators)."""
    p = _Parser(text)
    f = p.inner()
    if p.peek().kind != "eof":
        raise p.error(f"unexpected '{p.peek().text}'")
    return normalize(f, bounds)


def parse_bounds(items: Mapping[str, object] | None) -> Bounds | None:
    if not items:
        return None
    return {k: (float(v[0]), float(v[1])) for k, v in items.items()}
