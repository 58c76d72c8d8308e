"""Subtask sequencing: alternatives, the reachability premise, selection.

A sequence orders the pending subtasks.  It is *feasible* at ``(x, t)`` when
every term can be reached before its remaining time runs out, travelling at
speed ``u`` along worst-case set-to-set distances::

    required[1] = d(x, P1) / u
    required[l] = depart[l-1] + D(P_{l-1}, P_l) / u
    depart[l]   = max(required[l], earliest[l]) + dwell_adjust[l]

with ``D`` the ordered set distance.  ``earliest`` is the time the term's
window opens; ``dwell_adjust`` charges Globally-type terms for the part of
their hold that the worst-case traversal does not already cover.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import TargetSet, diameter, ordered_set_distance, signed_distance
from .stl.syntax import OpKind, SpecTree, Subtask, clause_set

PERMUTATION_CUTOFF = 8
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class SequenceTerm:
    subtask_id: int
    target: TargetSet
    remaining0: float
    dwell: float = 0.0
    earliest0: float = -math.inf
    clause: int = 0

    def __post_init__(self):
        if self.dwell < 0:
            raise ValueError("dwell must be nonnegative")


@dataclass(frozen=True)
class SubtaskSequence:
    terms: tuple[SequenceTerm, ...]
    required: tuple[float, ...]
    slack: tuple[float, ...]
    chain_times: tuple[float, ...]
    constructed_at: float
    u_max: float
    hold: tuple[float, float] | None = None

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(t.subtask_id for t in self.terms)

    @property
    def feasible(self) -> bool:
        return all(s >= -FEAS_TOL for s in self.slack)

    @property
    def total_slack(self) -> float:
        return float(sum(self.slack))

    def __len__(self) -> int:
        return len(self.terms)


class NoFeasibleSequence(RuntimeError):
    """No order satisfies the reachability premise; carries the closest miss."""

    def __init__(self, best: SubtaskSequence | None, deficit: float, message: str | None = None):
        self.best = best
        self.deficit = deficit
        order = best.ids if best is not None else ()
        super().__init__(message or f"no feasible subtask sequence; closest order {order} misses by {deficit:.4g} s")


def dwell_adjustment(term: SequenceTerm, u_max: float, credit: bool = True) -> float:
    if term.dwell <= 0:
        return 0.0
    if not credit:
        return term.dwell
    return max(0.0, term.dwell - diameter(term.target) / u_max)


def evaluate(
    terms: Sequence[SequenceTerm],
    x,
    t: float,
    u_max: float,
    constructed_at: float | None = None,
    dwell_credit: bool = True,
    hold: tuple[float, float] | None = None,
) -> SubtaskSequence:
    """Required/remaining/slack of ``terms`` in this order at ``(x, t)``.

    ``hold`` is ``(end, credit)`` of a Globally hold in progress: nothing can
    be reached before ``end - credit``.
    """
    if not u_max > 0:
        raise ValueError("u_max must be positive")
    t0 = t if constructed_at is None else constructed_at
    x = np.atleast_1d(np.asarray(x, dtype=float))
    required, slack, chain = [], [], []
    depart = 0.0
    link = 0.0
    delay = max(0.0, hold[0] - t - hold[1]) if hold else 0.0
    for l, term in enumerate(terms):
        r = term.remaining0 - (t - t0)
        if l == 0:
            req = delay + max(0.0, -signed_distance(x, term.target)[0] / u_max) if delay else -signed_distance(x, term.target)[0] / u_max
        else:
            hop = ordered_set_distance(terms[l - 1].target, term.target) / u_max
            req = depart + hop
            link += hop + dwell_adjustment(terms[l - 1], u_max, dwell_credit)
        earliest = term.earliest0 - (t - t0)
        depart = max(req, earliest) + dwell_adjustment(term, u_max, dwell_credit)
        required.append(req)
        slack.append(r - req)
        chain.append(link)
    rebased = tuple(replace(term, remaining0=term.remaining0 - (t - t0), earliest0=term.earliest0 - (t - t0)) for term in terms)
    return SubtaskSequence(rebased, tuple(required), tuple(slack), tuple(chain), float(t), float(u_max), hold)


def feasible(order: Sequence[SequenceTerm], x, t: float, u_max: float, dwell_credit: bool = True) -> tuple[bool, tuple[float, ...]]:
    seq = evaluate(order, x, t, u_max, dwell_credit=dwell_credit)
    return seq.feasible, seq.slack


# -- building terms from a specification ------------------------------------

def initial_remaining(s: Subtask) -> float:
    op = s.op
    return {
        OpKind.F: op.b,
        OpKind.U: op.b,
        OpKind.G: op.a,
        OpKind.FG: op.b + (op.c or 0.0),
        OpKind.GF: op.a + (op.d or 0.0),
    }[op.kind]


def window_open(s: Subtask) -> float:
    op = s.op
    if op.kind in (OpKind.FG, OpKind.GF):
        return op.a + op.c
    return op.a


def hold_length(s: Subtask) -> float:
    op = s.op
    if op.kind is OpKind.G:
        return op.b - op.a
    if op.kind is OpKind.FG:
        return op.d - op.c
    return 0.0


def clause_targets(s: Subtask) -> list[TargetSet]:
    return [clause_set(c) for c in s.inner.clauses]


@dataclass(frozen=True)
class Choice:
    """One concrete way of meeting a subtask: which member and which clause."""

    subtask: Subtask
    clause: int
    target: TargetSet


def enumerate_alternatives(spec: SpecTree, groups: Iterable[int] | None = None) -> list[tuple[Choice, ...]]:
    """Every combination of disjunct choices, one ``Choice`` per group."""
    idx = range(len(spec.groups)) if groups is None else groups
    per_group = []
    for g in idx:
        options = []
        for s in spec.groups[g]:
            for k, target in enumerate(clause_targets(s)):
                options.append(Choice(s, k, target))
        per_group.append(options)
    return [tuple(combo) for combo in itertools.product(*per_group)]


def make_term(c: Choice, remaining: float | None = None, t: float = 0.0) -> SequenceTerm:
    r = initial_remaining(c.subtask) - t if remaining is None else remaining
    return SequenceTerm(c.subtask.id, c.target, r, hold_length(c.subtask), window_open(c.subtask) - t, c.clause)


def _orders(terms: Sequence[SequenceTerm], cutoff: int):
    if len(terms) <= cutoff:
        yield from itertools.permutations(terms)
    else:
        yield tuple(sorted(terms, key=lambda term: (term.remaining0, term.subtask_id)))


def all_orders(alternatives, x, t, u_max, cutoff=PERMUTATION_CUTOFF, dwell_credit=True, head_filter=None, hold=None):
    """Evaluate every order of every alternative (``alternatives`` are term lists)."""
    out = []
    for terms in alternatives:
        for order in _orders(terms, cutoff):
            if head_filter is not None and not head_filter(order):
                continue
            out.append(evaluate(order, x, t, u_max, dwell_credit=dwell_credit, hold=hold))
    return out


def _rank(seq: SubtaskSequence):
    return (-seq.total_slack, seq.ids, tuple(term.clause for term in seq.terms))


def select(alternatives, x, t, u_max, cutoff=PERMUTATION_CUTOFF, dwell_credit=True, head_filter=None, hold=None) -> SubtaskSequence:
    """Feasible order with the largest total slack (ties: smallest id tuple)."""
    evaluated = all_orders(alternatives, x, t, u_max, cutoff, dwell_credit, head_filter, hold)
    if not evaluated:
        if head_filter is not None:
            return select(alternatives, x, t, u_max, cutoff, dwell_credit, hold=hold)
        raise NoFeasibleSequence(None, math.inf, "no subtasks to sequence")
    ok = [s for s in evaluated if s.feasible]
    if ok:
        return min(ok, key=_rank)
    if head_filter is not None:
        return select(alternatives, x, t, u_max, cutoff, dwell_credit, hold=hold)
    best = min(evaluated, key=lambda s: (-min(s.slack), _rank(s)))
    raise NoFeasibleSequence(best, -min(best.slack))


def resequence_for_recurrence(alternatives, subtask_id: int, x, t: float, u_max: float, cutoff=PERMUTATION_CUTOFF, dwell_credit=True, hold=None) -> SubtaskSequence:
    """New order after a recurring subtask's remaining time was reset.

    ``alternatives`` already carry the reset remaining time.  Orders that put
    the reset subtask first are only used when nothing else is feasible.
    """
    return select(alternatives, x, t, u_max, cutoff, dwell_credit, lambda order: order[0].subtask_id != subtask_id, hold)


def remove_completed(seq: SubtaskSequence, subtask_id: int, x=None, t: float | None = None, dwell_credit: bool = True) -> SubtaskSequence:
    """Drop a term and recompute chain times for the new adjacency.

    With ``x`` and ``t`` the required/slack columns are re-evaluated there
    (this is the premise check for the subsequence); otherwise they are NaN.
    """
    ids = seq.ids
    if subtask_id not in ids:
        raise KeyError(f"subtask {subtask_id} is not in the sequence {ids}")
    terms = tuple(term for term in seq.terms if term.subtask_id != subtask_id)
    if x is not None and terms:
        return evaluate(terms, x, t, seq.u_max, constructed_at=seq.constructed_at, dwell_credit=dwell_credit, hold=seq.hold)
    chain, link = [], 0.0
    for l, term in enumerate(terms):
        if l:
            link += ordered_set_distance(terms[l - 1].target, term.target) / seq.u_max
            link += dwell_adjustment(terms[l - 1], seq.u_max, dwell_credit)
        chain.append(link)
    nan = tuple(math.nan for _ in terms)
    return SubtaskSequence(terms, nan, nan, tuple(chain), seq.constructed_at, seq.u_max, seq.hold)


def with_remaining(terms: Sequence[SequenceTerm], remaining: dict[int, float], earliest: dict[int, float] | None = None):
    out = []
    for term in terms:
        r = remaining.get(term.subtask_id, term.remaining0)
        e = term.earliest0 if earliest is None else earliest.get(term.subtask_id, term.earliest0)
        out.append(replace(term, remaining0=r, earliest0=e))
    return tuple(out)
