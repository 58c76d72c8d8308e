"""Negation elimination and DNF conversion for inner (atemporal) formulas."""
from __future__ import annotations

import math
from itertools import product
from typing import Mapping

from .syntax import (
    And,
    EmptySetError,
    InnerFormula,
    NegationError,
    NonCompactError,
    Not,
    Or,
    Predicate,
    RawFormula,
)

Bounds = Mapping[str, tuple[float, float]]


def _slabs(var: str, lo: float, hi: float, bounds: Bounds | None, what: str) -> list[tuple[str, float, float]]:
    # complement of lo <= var <= hi inside the bounding interval of var
    if not bounds or var not in bounds:
        raise NonCompactError(f"negating {what} needs a bounding interval for '{var}'")
    L, H = bounds[var]
    pieces = []
    if L < lo:
        pieces.append((var, L, min(lo, H)))
    if hi < H:
        pieces.append((var, max(hi, L), H))
    return [p for p in pieces if p[1] < p[2]]


def _negate_atom(p: Predicate, bounds: Bounds | None) -> RawFormula:
    if p.kind in ("ge", "le"):
        v, a = p.vars[0], p.params[0]
        if bounds and v in bounds:
            L, H = bounds[v]
            lo, hi = (L, min(a, H)) if p.kind == "ge" else (max(a, L), H)
            if not lo < hi:
                raise EmptySetError(f"negation of {p} is empty inside the bounds")
            return Predicate("box", (v,), (lo, hi))
        return Predicate("le" if p.kind == "ge" else "ge", p.vars, p.params)
    if p.kind == "circle":
        raise NegationError(f"cannot negate {p}: the outside of a disc is not convex")
    if p.kind == "box":
        pieces = _slabs(p.vars[0], p.params[0], p.params[1], bounds, str(p))
        if not pieces:
            raise EmptySetError(f"negation of {p} is empty inside the bounds")
        return Or(Predicate("box", (v,), (a, b)) for v, a, b in pieces)
    # rect: outside in x (full y range) or outside in y (full x range)
    xlo, xhi, ylo, yhi = p.params
    xs = _slabs("x", xlo, xhi, bounds, str(p))
    ys = _slabs("y", ylo, yhi, bounds, str(p))
    (XL, XH), (YL, YH) = bounds["x"], bounds["y"]
    out = [Predicate("rect", ("x", "y"), (a, b, YL, YH)) for _, a, b in xs]
    out += [Predicate("rect", ("x", "y"), (XL, XH, a, b)) for _, a, b in ys]
    if not out:
        raise EmptySetError(f"negation of {p} is empty inside the bounds")
    return Or(out)


def to_nnf(f: RawFormula, bounds: Bounds | None = None, negate: bool = False) -> RawFormula:
    """Push negations down to atoms and complement them there."""
    if isinstance(f, Predicate):
        return _negate_atom(f, bounds) if negate else f
    if isinstance(f, Not):
        return to_nnf(f.arg, bounds, not negate)
    if isinstance(f, And):
        parts = tuple(to_nnf(g, bounds, negate) for g in f)
        return Or(parts) if negate else And(parts)
    if isinstance(f, Or):
        parts = tuple(to_nnf(g, bounds, negate) for g in f)
        return And(parts) if negate else Or(parts)
    raise TypeError(f"not a formula node: {f!r}")


def _dnf(f: RawFormula) -> list[tuple[Predicate, ...]]:
    if isinstance(f, Predicate):
        return [(f,)]
    if isinstance(f, Or):
        out = []
        for g in f:
            out.extend(_dnf(g))
        return out
    if isinstance(f, And):
        out = [()]
        for g in f:
            out = [a + b for a, b in product(out, _dnf(g))]
        return out
    raise TypeError(f"unexpected node after NNF: {f!r}")


def _dedupe(items):
    seen, out = set(), []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return tuple(out)


def normalize(f: RawFormula, bounds: Bounds | None = None) -> InnerFormula:
    """Negation-free DNF equivalent of ``f``.

    Complements of boxes are expressed with the caller's ``bounds``
    (a ``{var: (lo, hi)}`` map); complements of discs are rejected.
    """
    if bounds:
        for v, (lo, hi) in bounds.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {v}: {(lo, hi)}")
    clauses = [_dedupe(c) for c in _dnf(to_nnf(f, bounds))]
    return InnerFormula(_dedupe(clauses))
