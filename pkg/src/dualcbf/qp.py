"""Dense strictly convex QP solver for the per-step control problem.

    minimize    1/2 u^T H u + c^T u
    subject to  a_i^T u >= b_i      for every row i

The solver is the dual active-set method of Goldfarb and Idnani: it starts
from the unconstrained minimiser and adds the most violated row until the
iterate is primal feasible, dropping rows whose multiplier would turn
negative.  Problems here are tiny (n <= 3, a few dozen rows), so every
linear solve is done densely.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEAS_TOL = 1e-9
KKT_TOL = 1e-8


class QpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    hessian: np.ndarray
    linear: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.hessian = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        n = self.hessian.shape[0]
        self.linear = np.zeros(n) if self.linear is None else np.asarray(self.linear, dtype=float).reshape(n)
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.shape[0]:
            raise ValueError("row count mismatch between A and b")
        if not np.allclose(self.hessian, self.hessian.T):
            raise ValueError("hessian must be symmetric")

    @property
    def dim(self) -> int:
        return self.hessian.shape[0]

    @classmethod
    def from_rows(cls, dim: int, rows, hessian=None, linear=None) -> "QpProblem":
        rows = list(rows)
        A = np.array([r[0] for r in rows], dtype=float).reshape(-1, dim)
        b = np.array([r[1] for r in rows], dtype=float)
        H = np.eye(dim) if hessian is None else hessian
        return cls(H, linear, A, b)


@dataclass
class QpSolution:
    u: np.ndarray
    status: QpStatus
    active_set: tuple[int, ...] = ()
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kkt_residual: float = math.inf
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status is QpStatus.OPTIMAL


def kkt_residual(p: QpProblem, u: np.ndarray, active, lam) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    active = list(active)
    lam = np.asarray(lam, dtype=float)
    grad = p.hessian @ u + p.linear
    if active:
        grad = grad - p.A[active].T @ lam
    s = p.A @ u - p.b
    parts = [np.max(np.abs(grad)) if grad.size else 0.0]
    if s.size:
        parts.append(max(0.0, -float(s.min())))
    if lam.size:
        parts.append(max(0.0, -float(lam.min())))
        parts.append(float(np.max(np.abs(lam * s[active]))))
    return float(max(parts))


def _try_warm(p: QpProblem, active: tuple[int, ...]) -> QpSolution | None:
    m = p.A.shape[0]
    if not active or any(i >= m for i in active):
        return None
    N = p.A[list(active)]
    q = len(active)
    K = np.block([[p.hessian, -N.T], [N, np.zeros((q, q))]])
    rhs = np.concatenate([-p.linear, p.b[list(active)]])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    u, lam = sol[: p.dim], sol[p.dim :]
    if np.any(lam < -KKT_TOL) or np.any(p.A @ u - p.b < -FEAS_TOL * (1.0 + np.abs(p.b))):
        return None
    lam = np.maximum(lam, 0.0)
    res = kkt_residual(p, u, active, lam)
    if res > KKT_TOL:
        return None
    return QpSolution(u, QpStatus.OPTIMAL, tuple(active), lam, res, 0)


def solve(p: QpProblem, warm_start: tuple[int, ...] | None = None, max_iter: int | None = None) -> QpSolution:
    """Return the unique minimiser, or an ``INFEASIBLE`` solution.

    ``warm_start`` is a previous active set; it is accepted only if its
    equality-constrained solution already satisfies every KKT condition,
    otherwise the cold dual method runs.  Ties are broken by lowest row index,
    so identical problems give identical answers.
    """
    if warm_start:
        warm = _try_warm(p, tuple(warm_start))
        if warm is not None:
            return warm

    H, c, A, b = p.hessian, p.linear, p.A, p.b
    n, m = p.dim, A.shape[0]
    Hinv = np.linalg.inv(H)
    u = -Hinv @ c
    active: list[int] = []
    lam = np.zeros(0)
    tol = FEAS_TOL * (1.0 + np.abs(b))
    max_iter = max_iter or 10 * (m + n) + 20
    it = 0
    while True:
        s = A @ u - b
        viol = np.flatnonzero(s < -tol)
        if viol.size == 0:
            break
        pidx = int(viol[np.argmin(s[viol])])
        npv = A[pidx]
        lam_p = np.append(lam, 0.0)
        while True:
            it += 1
            if it > max_iter:
                return QpSolution(u, QpStatus.INFEASIBLE, tuple(active), lam, math.inf, it)
            q = len(active)
            Hn = Hinv @ npv
            if q:
                N = A[active].T
                HN = Hinv @ N
                r = np.linalg.solve(N.T @ HN, N.T @ Hn)
                z = Hn - HN @ r
            else:
                r = np.zeros(0)
                z = Hn
            t1, k = math.inf, -1
            for j in range(q):
                if r[j] > 1e-14:
                    ratio = lam_p[j] / r[j]
                    if ratio < t1:
                        t1, k = ratio, j
            zn = float(z @ npv)
            t2 = -(float(npv @ u) - b[pidx]) / zn if zn > 1e-14 * max(1.0, float(npv @ npv)) else math.inf
            t = min(t1, t2)
            if math.isinf(t):
                return QpSolution(u, QpStatus.INFEASIBLE, tuple(active), lam_p[:q], math.inf, it)
            if math.isinf(t2):
                lam_p[:q] -= t * r
                lam_p[q] += t
                del active[k]
                lam_p = np.delete(lam_p, k)
                continue
            u = u + t * z
            lam_p[:q] -= t * r
            lam_p[q] += t
            if t2 <= t1:
                active.append(pidx)
                lam = lam_p
                break
            del active[k]
            lam_p = np.delete(lam_p, k)
    lam = np.maximum(lam, 0.0)
    return QpSolution(u, QpStatus.OPTIMAL, tuple(active), lam, kkt_residual(p, u, active, lam), it)


def _cut_cube_rows(u_max: float) -> list[tuple[np.ndarray, float]]:
    # |u_i| <= a and |u1|+|u2|+|u3| <= sqrt(3) a; farthest vertex (a, (sqrt3-1)a, 0)
    a = u_max / math.sqrt(1.0 + (math.sqrt(3.0) - 1.0) ** 2)
    rows = []
    for i in range(3):
        for sgn in (1.0, -1.0):
            w = np.zeros(3)
            w[i] = sgn
            rows.append((-w, -a))
    for signs in np.array(np.meshgrid([1, -1], [1, -1], [1, -1])).T.reshape(-1, 3):
        w = signs / math.sqrt(3.0)
        rows.append((-w, -a))
    return rows


def ball_rows(u_max: float, dim: int, facets: int = 32) -> list[tuple[np.ndarray, float]]:
    """Rows ``a^T u >= b`` of a polytope inscribed in ``{||u|| <= u_max}``.

    1-D is exact, 2-D is a regular ``facets``-gon with vertices on the circle,
    3-D is a cube with cut corners, higher dimensions use the inscribed cube.
    """
    if not u_max > 0:
        raise ValueError("u_max must be positive")
    if dim == 1:
        return [(np.array([1.0]), -u_max), (np.array([-1.0]), -u_max)]
    if dim == 2:
        if facets < 4:
            raise ValueError("need at least 4 facets in 2-D")
        off = u_max * math.cos(math.pi / facets)
        rows = []
        for k in range(facets):
            th = (2 * k + 1) * math.pi / facets
            rows.append((-np.array([math.cos(th), math.sin(th)]), -off))
        return rows
    if dim == 3:
        return _cut_cube_rows(u_max)
    s = u_max / math.sqrt(dim)
    rows = []
    for i in range(dim):
        for sgn in (1.0, -1.0):
            w = np.zeros(dim)
            w[i] = sgn
            rows.append((-w, -s))
    return rows


def inscribed_radius(u_max: float, dim: int, facets: int = 32) -> float:
    """Largest speed available in every direction under ``ball_rows``."""
    if dim == 1:
        return u_max
    if dim == 2:
        return u_max * math.cos(math.pi / facets)
    if dim == 3:
        return u_max / math.sqrt(1.0 + (math.sqrt(3.0) - 1.0) ** 2)
    return u_max / math.sqrt(dim)
