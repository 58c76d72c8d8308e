"""Independent oracles and random generators shared by the test modules."""
from __future__ import annotations

import math

import numpy as np

from dualcbf.geometry import Box, Disc


# -- QP ------------------------------------------------------------------------

def random_qp(rng: np.random.Generator):
    """Strictly convex QP with 0-6 rows, feasible by construction."""
    n = int(rng.integers(1, 3))
    m = int(rng.integers(0, 7))
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    H = q @ np.diag(rng.uniform(0.5, 2.0, n)) @ q.T
    H = 0.5 * (H + H.T)
    c = rng.normal(size=n)
    u0 = rng.uniform(-2.0, 2.0, n)
    A = rng.normal(size=(m, n))
    b = A @ u0 - rng.uniform(0.1, 1.0, m)
    return H, c, A, b, u0


def _line_points(a, b, centre, half, points):
    # grid along the boundary line a.u = b, through the window around centre
    nrm2 = float(a @ a)
    p0 = centre + (b - a @ centre) / nrm2 * a
    if np.linalg.norm(p0 - centre) > half * math.sqrt(len(a)):
        return np.zeros((0, len(a)))
    if len(a) == 1:
        return p0[None, :]
    d = np.array([-a[1], a[0]]) / math.sqrt(nrm2)
    s = np.linspace(-half * math.sqrt(2.0), half * math.sqrt(2.0), points)
    return p0 + s[:, None] * d


def grid_qp(H, c, A, b, u0, points: int = 201, tol: float = 1e-7) -> np.ndarray:
    """Brute-force minimiser over successively finer grids of feasible points.

    Each level grids the window and, in addition, every constraint's
    boundary line through it, so faces and vertices are sampled directly.
    A window is only shrunk once its best point lies strictly inside it;
    otherwise it is re-centred on that point at the same resolution.
    """
    n = len(c)
    f = lambda U: 0.5 * np.sum((U @ H) * U, axis=1) + U @ c
    lam = np.linalg.eigvalsh(H)
    centre = np.linalg.solve(H, -c)
    # the minimiser lies in the sublevel set through the feasible point u0
    half = math.sqrt(lam[-1] / lam[0]) * np.linalg.norm(u0 - centre) + 0.1
    best = None
    for _ in range(400):
        axes = [np.linspace(centre[i] - half, centre[i] + half, points) for i in range(n)]
        U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        U = np.vstack([U] + [_line_points(a, bi, centre, half, points) for a, bi in zip(A, b)])
        ok = np.all(U @ A.T >= b - 1e-10, axis=1) if len(b) else np.ones(len(U), dtype=bool)
        U = U[ok] if best is None else np.vstack([U[ok], best[None, :]])
        best = U[int(np.argmin(f(U)))]
        step = 2.0 * half / (points - 1)
        if np.all(np.abs(best - centre) < half - 1.5 * step):
            if step < tol:
                return best
            half = (points - 1) * step / 8.0
        centre = best
    raise RuntimeError("grid search did not settle")


# -- sets ------------------------------------------------------------------------

def random_set(rng: np.random.Generator, lo: float = 0.0, hi: float = 20.0):
    if rng.random() < 0.5:
        r = float(rng.uniform(0.3, 2.0))
        return Disc(tuple(rng.uniform(lo + r, hi - r, 2)), r)
    size = rng.uniform(0.3, 3.0, 2)
    a = rng.uniform(lo, hi - size, 2)
    return Box(tuple(a), tuple(a + size))


def random_point_in(rng: np.random.Generator, P) -> np.ndarray:
    if isinstance(P, Disc):
        th = rng.uniform(0.0, 2.0 * math.pi)
        rad = P.radius * math.sqrt(rng.random())
        return np.array(P.center) + rad * np.array([math.cos(th), math.sin(th)])
    return rng.uniform(P.lo, P.hi)


def boundary_points(P, count: int = 2000) -> np.ndarray:
    """Dense points on the boundary (the farthest point of a convex set lies there)."""
    if isinstance(P, Disc):
        th = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
        return np.array(P.center) + P.radius * np.column_stack([np.cos(th), np.sin(th)])
    lo, hi = np.array(P.lo), np.array(P.hi)
    if len(lo) == 1:
        return np.array([[lo[0]], [hi[0]]])
    s = np.linspace(0.0, 1.0, count // 4)
    edges = [
        np.column_stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, lo[1])]),
        np.column_stack([lo[0] + s * (hi[0] - lo[0]), np.full_like(s, hi[1])]),
        np.column_stack([np.full_like(s, lo[0]), lo[1] + s * (hi[1] - lo[1])]),
        np.column_stack([np.full_like(s, hi[0]), lo[1] + s * (hi[1] - lo[1])]),
    ]
    return np.vstack(edges)


def sampled_ordered_distance(Pi, Pj, count: int = 4000) -> float:
    return float(max(0.0, np.max(-Pj.signed_distance_many(boundary_points(Pi, count)))))


# -- smoothness ------------------------------------------------------------------

def nondegenerate(x, sets, margin: float = 1e-2) -> bool:
    """True when every signed distance is differentiable with room to spare."""
    x = np.asarray(x, dtype=float)
    for P in sets:
        sd = P.signed_distance(x)[0]
        if abs(sd) < margin:
            return False
        if isinstance(P, Disc) and np.linalg.norm(x[list(P.axes)] - np.array(P.center)) < margin:
            return False
        if isinstance(P, Box) and sd > 0:
            faces = np.concatenate([x - np.array(P.lo), np.array(P.hi) - x])
            faces = np.sort(faces[np.isfinite(faces)])
            if len(faces) > 1 and faces[1] - faces[0] < margin:
                return False
    return True


def central_difference(f, x, h: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g
