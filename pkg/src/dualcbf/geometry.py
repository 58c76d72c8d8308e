"""Target sets and the distance calculus used by the CBFs and the sequencer.

Three shapes are supported:

* ``Disc``     -- Euclidean ball; with ``axes`` it constrains only some state
                  coordinates (a cylinder in the full state space).
* ``Box``      -- axis-aligned box; infinite bounds are allowed so a single
                  inequality such as ``x >= 3`` is a ``Box`` too.
* ``Polytope`` -- bounded intersection of halfspaces ``A x <= b``.

Signed distance is positive inside (depth) and minus the Euclidean distance
outside.  All sets are immutable and hashable, so pairwise set distances can
be cached.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar

# Direction samples for set-distance suprema that have no closed form.
BOUNDARY_SAMPLES = 720


class GeometryError(ValueError):
    pass


class TargetSet:
    """Common interface; concrete shapes are frozen dataclasses below."""

    dim: int

    @property
    def is_compact(self) -> bool:
        raise NotImplementedError

    def signed_distance(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def signed_distance_many(self, xs: np.ndarray) -> np.ndarray:
        return np.array([self.signed_distance(x)[0] for x in xs])

    def support(self, w: np.ndarray) -> float:
        raise NotImplementedError

    def contains(self, x, tol: float = 0.0) -> bool:
        return self.signed_distance(np.asarray(x, dtype=float))[0] >= -tol


@dataclass(frozen=True)
class Disc(TargetSet):
    center: tuple[float, ...]
    radius: float
    axes: tuple[int, ...] | None = None
    dim: int = field(default=0)

    def __post_init__(self):
        center = tuple(float(c) for c in self.center)
        object.__setattr__(self, "center", center)
        axes = tuple(range(len(center))) if self.axes is None else tuple(self.axes)
        object.__setattr__(self, "axes", axes)
        if not self.dim:
            object.__setattr__(self, "dim", len(center))
        if len(axes) != len(center):
            raise GeometryError("disc axes and center differ in length")
        if len(set(axes)) != len(axes) or max(axes) >= self.dim:
            raise GeometryError(f"bad disc axes {axes} for dimension {self.dim}")
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise GeometryError(f"disc radius must be positive, got {self.radius}")

    @property
    def is_compact(self) -> bool:
        return len(self.axes) == self.dim

    @cached_property
    def _c(self) -> np.ndarray:
        return np.array(self.center)

    @cached_property
    def _ax(self) -> np.ndarray:
        return np.array(self.axes, dtype=int)

    def signed_distance(self, x):
        dv = np.asarray(x, dtype=float)[self._ax] - self._c
        nrm = float(np.sqrt(dv @ dv))
        grad = np.zeros(self.dim)
        if nrm > 0.0:
            grad[self._ax] = -dv / nrm
        else:
            # centre is a kink; pick the boundary point along the first axis
            grad[self._ax[0]] = -1.0
        return self.radius - nrm, grad

    def signed_distance_many(self, xs):
        dv = np.asarray(xs, dtype=float)[:, self._ax] - self._c
        return self.radius - np.linalg.norm(dv, axis=1)

    def support(self, w):
        w = np.asarray(w, dtype=float)
        if not self.is_compact:
            off = np.delete(w, self._ax)
            if np.any(off != 0.0):
                return math.inf
        wa = w[self._ax]
        return float(wa @ self._c + self.radius * np.linalg.norm(wa))


@dataclass(frozen=True)
class Box(TargetSet):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise GeometryError("box bounds must be nonempty and of equal length")
        for i, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise GeometryError(f"empty box on axis {i}: lo={a} >= hi={b}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def is_compact(self) -> bool:
        return all(math.isfinite(v) for v in self.lo + self.hi)

    @cached_property
    def _lo(self) -> np.ndarray:
        return np.array(self.lo)

    @cached_property
    def _hi(self) -> np.ndarray:
        return np.array(self.hi)

    def corners(self) -> np.ndarray:
        if not self.is_compact:
            raise GeometryError("unbounded box has no corners")
        return np.array(list(itertools.product(*zip(self.lo, self.hi))))

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self._lo, self._hi
        grad = np.zeros(self.dim)
        if np.all(x >= lo) and np.all(x <= hi):
            # faces ordered (axis0 lo, axis0 hi, axis1 lo, ...); first minimum wins
            faces = np.empty(2 * self.dim)
            faces[0::2] = x - lo
            faces[1::2] = hi - x
            k = int(np.argmin(faces))
            grad[k // 2] = 1.0 if k % 2 == 0 else -1.0
            return float(faces[k]), grad
        return _outside(np.clip(x, lo, hi) - x)

    def signed_distance_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        lo, hi = self._lo, self._hi
        depth = np.minimum(xs - lo, hi - xs).min(axis=1)
        outside = np.linalg.norm(np.clip(xs, lo, hi) - xs, axis=1)
        return np.where(depth >= 0.0, depth, -outside)

    def support(self, w):
        w = np.asarray(w, dtype=float)
        with np.errstate(invalid="ignore"):
            terms = np.where(w > 0, w * self._hi, np.where(w < 0, w * self._lo, 0.0))
        return float(terms.sum())


@dataclass(frozen=True)
class Polytope(TargetSet):
    """``{x : normals @ x <= offsets}``; checked bounded and nonempty."""

    normals: tuple[tuple[float, ...], ...]
    offsets: tuple[float, ...]

    def __post_init__(self):
        A = tuple(tuple(float(v) for v in row) for row in self.normals)
        b = tuple(float(v) for v in self.offsets)
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        if not A or len(A) != len(b) or len({len(r) for r in A}) != 1:
            raise GeometryError("polytope needs matching nonempty normals/offsets")
        if any(np.linalg.norm(r) == 0 for r in A):
            raise GeometryError("polytope normal must be nonzero")
        n = len(A[0])
        for i in range(n):
            for sign in (1.0, -1.0):
                cost = np.zeros(n)
                cost[i] = -sign
                res = linprog(cost, A_ub=self._A, b_ub=self._b, bounds=[(None, None)] * n)
                if res.status == 2:
                    raise GeometryError("polytope is empty")
                if res.status == 3:
                    raise GeometryError("polytope is unbounded")
        if len(self.vertices) == 0:
            raise GeometryError("polytope has no vertices (degenerate)")

    @property
    def dim(self) -> int:
        return len(self.normals[0])

    @property
    def is_compact(self) -> bool:
        return True

    @cached_property
    def _A(self) -> np.ndarray:
        return np.array(self.normals)

    @cached_property
    def _b(self) -> np.ndarray:
        return np.array(self.offsets)

    @cached_property
    def vertices(self) -> np.ndarray:
        A, b, n = self._A, self._b, self.dim
        found: list[np.ndarray] = []
        for rows in itertools.combinations(range(len(b)), n):
            sub = A[list(rows)]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            v = np.linalg.solve(sub, b[list(rows)])
            if np.all(A @ v <= b + 1e-9) and not any(np.allclose(v, u) for u in found):
                found.append(v)
        return np.array(found)

    def signed_distance(self, x):
        from .qp import QpProblem, solve  # local import: qp depends on nothing here

        x = np.asarray(x, dtype=float)
        A, b = self._A, self._b
        norms = np.linalg.norm(A, axis=1)
        slack = (b - A @ x) / norms
        if np.all(slack >= 0.0):
            k = int(np.argmin(slack))
            return float(slack[k]), -A[k] / norms[k]
        sol = solve(QpProblem(np.eye(self.dim), -x, -A, -b))
        return _outside(sol.u - x)

    def support(self, w):
        return float(np.max(self.vertices @ np.asarray(w, dtype=float)))


def _outside(d: np.ndarray) -> tuple[float, np.ndarray]:
    # d runs from x to its projection on the set
    dist = float(np.sqrt(d @ d))
    if dist == 0.0:
        # outside by a subnormal amount: d @ d underflowed
        s = np.sign(d)
        return 0.0, s / np.linalg.norm(s)
    return -dist, d / dist


def signed_distance(x, P: TargetSet) -> tuple[float, np.ndarray]:
    """Depth inside ``P``, minus the distance outside, and its gradient."""
    return P.signed_distance(np.atleast_1d(np.asarray(x, dtype=float)))


def point_set_distance(x, P: TargetSet) -> float:
    return max(0.0, -P.signed_distance(np.atleast_1d(np.asarray(x, dtype=float)))[0])


def _extreme_points(P: TargetSet) -> np.ndarray | None:
    if isinstance(P, Box):
        return P.corners()
    if isinstance(P, Polytope):
        return P.vertices
    return None


def _unit_directions(n: int, count: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.column_stack([np.cos(th), np.sin(th)])
    # n >= 3: Fibonacci lattice on the sphere (first three axes), then pad
    k = max(count, 8 * count // 3)
    i = np.arange(k) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / k)
    th = np.pi * (1.0 + 5.0**0.5) * i
    pts = np.column_stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)])
    if n > 3:
        pts = np.hstack([pts, np.zeros((k, n - 3))])
        pts = np.vstack([pts, np.eye(n), -np.eye(n)])
    return pts


@lru_cache(maxsize=4096)
def ordered_set_distance(Pi: TargetSet, Pj: TargetSet, samples: int = BOUNDARY_SAMPLES) -> float:
    """Worst-case distance from a point of ``Pi`` to the set ``Pj``.

    Exact for disc->disc, box->box and any box/polytope source (the distance
    to a convex set is convex, so the supremum sits on a vertex).  A disc
    source against anything else maximises the support-function gap
    ``sigma_Pi(w) - sigma_Pj(w)`` over ``samples`` unit directions and then
    polishes the best one in 2-D.
    """
    if not (Pi.is_compact and Pj.is_compact):
        raise GeometryError("ordered set distance needs compact sets")
    if Pi.dim != Pj.dim:
        raise GeometryError("sets live in different dimensions")
    if isinstance(Pi, Disc) and isinstance(Pj, Disc):
        gap = float(np.linalg.norm(Pi._c - Pj._c)) + Pi.radius - Pj.radius
        return max(0.0, gap)
    if isinstance(Pi, Box) and isinstance(Pj, Box):
        e = np.maximum.reduce([np.zeros(Pi.dim), Pj._lo - Pi._lo, Pi._hi - Pj._hi])
        return float(np.linalg.norm(e))
    ext = _extreme_points(Pi)
    if ext is not None:
        return max(point_set_distance(v, Pj) for v in ext)

    def gap(w):
        return Pi.support(w) - Pj.support(w)

    dirs = _unit_directions(Pi.dim, samples)
    vals = np.array([gap(w) for w in dirs])
    k = int(np.argmax(vals))
    best = float(vals[k])
    if Pi.dim == 2:
        th0 = math.atan2(dirs[k, 1], dirs[k, 0])
        step = 2.0 * math.pi / samples
        res = minimize_scalar(
            lambda th: -gap(np.array([math.cos(th), math.sin(th)])),
            bounds=(th0 - step, th0 + step),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(res.fun))
    return max(0.0, best)


def _interior_point(P: TargetSet) -> np.ndarray:
    if isinstance(P, Disc):
        return P._c.copy() if len(P.axes) == P.dim else np.zeros(P.dim)
    if isinstance(P, Box):
        return 0.5 * (P._lo + P._hi)
    return P.vertices.mean(axis=0)


@lru_cache(maxsize=1024)
def closest_point(Pi: TargetSet, Pj: TargetSet) -> tuple[float, ...]:
    """Point of ``Pi`` nearest to ``Pj`` (deepest inside ``Pj`` on overlap)."""
    if isinstance(Pi, Disc) and isinstance(Pj, Disc) and Pi.is_compact and Pj.is_compact:
        d = Pj._c - Pi._c
        nrm = float(np.linalg.norm(d))
        if nrm == 0.0:
            return tuple(float(v) for v in Pi._c)
        return tuple(float(v) for v in Pi._c + min(Pi.radius, nrm) * d / nrm)
    def objective(p):
        v, g = Pj.signed_distance(p)
        return -v, -g

    res = minimize(
        objective,
        _interior_point(Pi),
        jac=True,
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": lambda p: Pi.signed_distance(p)[0], "jac": lambda p: Pi.signed_distance(p)[1]}],
        options={"ftol": 1e-12, "maxiter": 200},
    )
    return tuple(float(v) for v in res.x)


def diameter(P: TargetSet) -> float:
    if not P.is_compact:
        raise GeometryError("unbounded set has no finite diameter")
    if isinstance(P, Disc):
        return 2.0 * P.radius
    if isinstance(P, Box):
        return float(np.linalg.norm(P._hi - P._lo))
    V = _extreme_points(P)
    return float(max(np.linalg.norm(a - b) for a, b in itertools.combinations(V, 2))) if len(V) > 1 else 0.0


class TravelTimes(NamedTuple):
    to_first: np.ndarray
    between: np.ndarray


def travel_times(x, sets: Sequence[TargetSet], u_max: float) -> TravelTimes:
    """Time to reach each set from ``x`` and worst-case set-to-set times at ``u_max``."""
    if not u_max > 0:
        raise GeometryError(f"u_max must be positive, got {u_max}")
    k = len(sets)
    to_first = np.array([-signed_distance(x, P)[0] / u_max for P in sets])
    between = np.zeros((k, k))
    for i, j in itertools.product(range(k), repeat=2):
        if i != j:
            between[i, j] = ordered_set_distance(sets[i], sets[j]) / u_max
    return TravelTimes(to_first, between)


def box_contains_disc(box: Box, disc: Disc) -> bool:
    others = np.delete(np.arange(box.dim), disc._ax)
    if np.any(np.isfinite(box._lo[others])) or np.any(np.isfinite(box._hi[others])):
        return False
    lo = box._lo[disc._ax]
    hi = box._hi[disc._ax]
    return bool(np.all(disc._c - disc.radius >= lo) and np.all(disc._c + disc.radius <= hi))


def disc_contains_box(disc: Disc, box: Box) -> bool:
    if not box.is_compact:
        return False
    return all(disc.signed_distance(c)[0] >= 0.0 for c in box.corners())


def disc_contains_disc(outer: Disc, inner: Disc) -> bool:
    if outer.axes != inner.axes:
        return False
    return float(np.linalg.norm(outer._c - inner._c)) + inner.radius <= outer.radius
