"""Abstract syntax for the supported STL fragment and its canonical printer.

A specification is a conjunction of *groups*; a group is one temporal subtask
or a disjunction of them.  Every subtask carries an inner formula in DNF whose
predicates are set-membership tests (signed distance >= 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Union

import numpy as np

from ..geometry import (
    Box,
    Disc,
    GeometryError,
    TargetSet,
    box_contains_disc,
    disc_contains_box,
    disc_contains_disc,
)


class SpecError(ValueError):
    """Invalid specification; carries a 1-based line/column when known."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


class SpecSyntaxError(SpecError):
    pass


class FragmentError(SpecError):
    """Well-formed text that falls outside the supported fragment."""


class NonCompactError(SpecError):
    pass


class EmptySetError(SpecError):
    pass


class NegationError(SpecError):
    pass


def fmt_num(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


@dataclass(frozen=True)
class Predicate:
    """Set-membership atom.

    ``kind`` is one of ``box``, ``circle``, ``rect``, ``ge``, ``le``.  The
    ``set`` field is filled in once the state variables are known.
    """

    kind: str
    vars: tuple[str, ...]
    params: tuple[float, ...]
    set: TargetSet | None = field(default=None, compare=False, repr=False)

    def __str__(self) -> str:
        p = [fmt_num(v) for v in self.params]
        if self.kind == "box":
            return f"box({self.vars[0]},{p[0]},{p[1]})"
        if self.kind == "circle":
            return f"circle({self.vars[0]},{self.vars[1]},{p[0]},{p[1]},{p[2]})"
        if self.kind == "rect":
            return f"rect({p[0]},{p[1]},{p[2]},{p[3]})"
        op = ">=" if self.kind == "ge" else "<="
        return f"{self.vars[0]} {op} {p[0]}"

    def bind(self, variables: tuple[str, ...]) -> "Predicate":
        n = len(variables)
        idx = {v: i for i, v in enumerate(variables)}
        lo = [-math.inf] * n
        hi = [math.inf] * n
        try:
            if self.kind == "circle":
                cx, cy, r = self.params
                region: TargetSet = Disc((cx, cy), r, axes=(idx[self.vars[0]], idx[self.vars[1]]), dim=n)
            else:
                if self.kind == "box":
                    lo[idx[self.vars[0]]], hi[idx[self.vars[0]]] = self.params
                elif self.kind == "rect":
                    xlo, xhi, ylo, yhi = self.params
                    lo[idx["x"]], hi[idx["x"]] = xlo, xhi
                    lo[idx["y"]], hi[idx["y"]] = ylo, yhi
                elif self.kind == "ge":
                    lo[idx[self.vars[0]]] = self.params[0]
                else:
                    hi[idx[self.vars[0]]] = self.params[0]
                region = Box(tuple(lo), tuple(hi))
        except GeometryError as exc:
            raise EmptySetError(f"invalid predicate {self}: {exc}") from None
        return Predicate(self.kind, self.vars, self.params, region)


class Not(tuple):
    """Raw negation node (only seen before normalisation)."""

    def __new__(cls, arg):
        return super().__new__(cls, (arg,))

    @property
    def arg(self):
        return self[0]


class And(tuple):
    pass


class Or(tuple):
    pass


RawFormula = Union[Predicate, Not, And, Or]


@dataclass(frozen=True)
class InnerFormula:
    """Negation-free DNF: a disjunction of conjunctive clauses."""

    clauses: tuple[tuple[Predicate, ...], ...]

    def __post_init__(self):
        if not self.clauses or any(not c for c in self.clauses):
            raise SpecError("inner formula needs at least one nonempty clause")

    def __str__(self) -> str:
        return " | ".join(" & ".join(str(p) for p in clause) for clause in self.clauses)

    def predicates(self) -> Iterator[Predicate]:
        for clause in self.clauses:
            yield from clause

    def bind(self, variables: tuple[str, ...]) -> "InnerFormula":
        return InnerFormula(tuple(tuple(p.bind(variables) for p in c) for c in self.clauses))

    def exact(self, x) -> float:
        """Pointwise robustness with true min/max (no smoothing)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return max(min(p.set.signed_distance(x)[0] for p in c) for c in self.clauses)

    def exact_many(self, xs: np.ndarray) -> np.ndarray:
        per_clause = [np.min([p.set.signed_distance_many(xs) for p in c], axis=0) for c in self.clauses]
        return np.max(per_clause, axis=0)


class OpKind(str, Enum):
    F = "F"
    G = "G"
    FG = "FG"
    GF = "GF"
    U = "U"


@dataclass(frozen=True)
class TemporalOp:
    kind: OpKind
    a: float
    b: float
    c: float | None = None
    d: float | None = None

    def __post_init__(self):
        bounds = [self.a, self.b] + ([self.c, self.d] if self.nested else [])
        if any(v is None for v in bounds):
            raise SpecError(f"{self.kind.value} needs {'four' if self.nested else 'two'} time bounds")
        if any(not math.isfinite(v) or v < 0 for v in bounds):
            raise SpecError(f"time bounds must be finite and nonnegative, got {bounds}")
        if self.b < self.a:
            raise SpecError(f"interval [{self.a},{self.b}] has b < a")
        if self.nested and self.d < self.c:
            raise SpecError(f"interval [{self.c},{self.d}] has d < c")

    @property
    def nested(self) -> bool:
        return self.kind in (OpKind.FG, OpKind.GF)

    @property
    def horizon(self) -> float:
        return self.b + (self.d if self.nested else 0.0)

    def __str__(self) -> str:
        outer = f"[{fmt_num(self.a)},{fmt_num(self.b)}]"
        if self.kind is OpKind.U:
            return f"U{outer}"
        if self.nested:
            return f"{self.kind.value[0]}{outer}{self.kind.value[1]}[{fmt_num(self.c)},{fmt_num(self.d)}]"
        return f"{self.kind.value}{outer}"


@dataclass(frozen=True)
class Subtask:
    id: int
    op: TemporalOp
    inner: InnerFormula
    left_inner: InnerFormula | None = None

    def __post_init__(self):
        if (self.left_inner is not None) != (self.op.kind is OpKind.U):
            raise SpecError("left_inner is required for Until and only for Until")

    def __str__(self) -> str:
        if self.op.kind is OpKind.U:
            return f"({self.left_inner}) {self.op} ({self.inner})"
        return f"{self.op}({self.inner})"

    def bind(self, variables) -> "Subtask":
        left = self.left_inner.bind(variables) if self.left_inner is not None else None
        return Subtask(self.id, self.op, self.inner.bind(variables), left)


@dataclass(frozen=True)
class SpecTree:
    groups: tuple[tuple[Subtask, ...], ...]
    variables: tuple[str, ...] = ()

    def __str__(self) -> str:
        parts = []
        for g in self.groups:
            if len(g) == 1:
                parts.append(str(g[0]))
            else:
                parts.append("(" + " || ".join(str(s) for s in g) + ")")
        return " && ".join(parts)

    @property
    def dim(self) -> int:
        return len(self.variables)

    def subtasks(self) -> Iterator[Subtask]:
        for g in self.groups:
            yield from g


def horizon(spec: SpecTree) -> float:
    """Length of signal needed to decide ``spec`` (max over its conjuncts)."""
    return max((s.op.horizon for s in spec.subtasks()), default=0.0)


def clause_set(clause: tuple[Predicate, ...]) -> TargetSet:
    """Single compact set on which a bound conjunctive clause holds.

    Box-like atoms are intersected exactly.  Discs must be nested with each
    other and with the box part; the innermost set is returned.
    """
    boxes = [p.set for p in clause if isinstance(p.set, Box)]
    discs = sorted((p.set for p in clause if isinstance(p.set, Disc)), key=lambda d: d.radius)
    text = " & ".join(str(p) for p in clause)
    box = None
    if boxes:
        lo = np.max([b._lo for b in boxes], axis=0)
        hi = np.min([b._hi for b in boxes], axis=0)
        if np.any(lo >= hi):
            raise EmptySetError(f"clause '{text}' describes an empty set")
        box = Box(tuple(lo), tuple(hi))
    disc = None
    if discs:
        disc = discs[0]
        for other in discs[1:]:
            if not disc_contains_disc(other, disc):
                raise FragmentError(f"clause '{text}': intersecting discs must be nested")
    if disc is None:
        if not box.is_compact:
            raise NonCompactError(f"clause '{text}' is unbounded")
        return box
    if box is None or box_contains_disc(box, disc):
        if not disc.is_compact:
            raise NonCompactError(f"clause '{text}' is unbounded")
        return disc
    if disc_contains_box(disc, box):
        return box
    if disc.is_compact and -box.signed_distance(disc._c)[0] >= disc.radius:
        raise EmptySetError(f"clause '{text}' describes an empty set")
    raise FragmentError(f"clause '{text}': a disc and a box must be nested")
