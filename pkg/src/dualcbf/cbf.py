"""Primary and secondary control barrier functions.

A primary CBF ``h = r(t) + rho(x)/u`` is nonnegative exactly when the
subtask's target can still be reached before its remaining time ``r`` runs
out at speed ``u``.  The secondary CBF couples the head of a subtask
sequence with every later term: ``b_i = r_i(t) + SD(x, P_head)/u - chain_i``.

Every evaluation returns the value, its state gradient and its partial
derivative in time, which is all the QP row ``grad.u + dt_term + gamma*h >= 0``
needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stl.smooth import DEFAULT_BETA, smooth_max_grad, smooth_robustness
from .stl.syntax import InnerFormula


@dataclass(frozen=True)
class CbfEvaluation:
    value: float
    grad_x: np.ndarray
    dt_term: float


@dataclass
class PrimaryCbf:
    subtask_id: int
    inner: InnerFormula
    remaining0: float
    u_max: float
    beta: float = DEFAULT_BETA
    t0: float = 0.0
    frozen: bool = False
    frozen_value: float = 0.0

    def __post_init__(self):
        if not self.u_max > 0:
            raise ValueError("u_max must be positive")

    def remaining(self, t: float) -> float:
        return self.frozen_value if self.frozen else self.remaining0 - (t - self.t0)

    def freeze(self, value: float) -> None:
        self.frozen, self.frozen_value = True, float(value)

    def reset(self, remaining: float, t: float) -> None:
        self.frozen, self.remaining0, self.t0 = False, float(remaining), float(t)


def primary_value(cbf: PrimaryCbf, x, t: float) -> CbfEvaluation:
    rho, grad = smooth_robustness(x, cbf.inner, cbf.beta)
    return CbfEvaluation(cbf.remaining(t) + rho / cbf.u_max, grad / cbf.u_max, 0.0 if cbf.frozen else -1.0)


def primary_disjunction(cbfs, x, t: float, beta: float | None = None) -> CbfEvaluation:
    """Smooth maximum over the members of a disjunction of subtasks."""
    if len(cbfs) == 1:
        return primary_value(cbfs[0], x, t)
    evals = [primary_value(c, x, t) for c in cbfs]
    beta = cbfs[0].beta if beta is None else beta
    val, w = smooth_max_grad([e.value for e in evals], beta)
    grad = np.sum([wi * e.grad_x for wi, e in zip(w, evals)], axis=0)
    dt_term = float(sum(wi * e.dt_term for wi, e in zip(w, evals)))
    return CbfEvaluation(val, grad, dt_term)


def _hold_delay(seq, t: float) -> float:
    # time still owed to a Globally hold that has been dropped from the sequence
    hold = getattr(seq, "hold", None)
    if hold is None:
        return 0.0
    end, credit = hold
    return max(0.0, end - t - credit)


def secondary_candidates(seq, x, t: float) -> list[float]:
    """One value per non-head term of ``seq`` (see module docstring)."""
    if len(seq.terms) < 2:
        raise ValueError("secondary CBF needs at least two terms")
    head = seq.terms[0].target
    sd = head.signed_distance(np.atleast_1d(np.asarray(x, dtype=float)))[0]
    elapsed = t - seq.constructed_at
    delay = _hold_delay(seq, t)
    return [
        term.remaining0 - elapsed + sd / seq.u_max - seq.chain_times[i] - delay
        for i, term in enumerate(seq.terms)
        if i > 0
    ]


def secondary_value(seq, x, t: float) -> tuple[CbfEvaluation, int]:
    """Exact minimum over the candidates; returns the critical term position."""
    cands = secondary_candidates(seq, x, t)
    k = int(np.argmin(cands))  # first occurrence: earliest sequence position
    grad = seq.terms[0].target.signed_distance(np.atleast_1d(np.asarray(x, dtype=float)))[1] / seq.u_max
    dt_term = -1.0 + (1.0 if _hold_delay(seq, t) > 0.0 else 0.0)
    return CbfEvaluation(float(cands[k]), grad, dt_term), k + 1
