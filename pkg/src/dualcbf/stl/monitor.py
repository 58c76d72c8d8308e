"""Exact offline robustness monitor over uniformly sampled trajectories.

Time quantifiers range over sample indices; a window endpoint sample is
included when it lies within dt/2 of the bound.  No smoothing is involved,
so this is the reference used to decide whether a run satisfied its
specification.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .syntax import OpKind, SpecTree, Subtask, horizon


class TrajectoryTooShort(ValueError):
    pass


@dataclass
class Trajectory:
    dt: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.x = np.asarray(self.x, dtype=float).reshape(len(self.t), -1)
        self.u = np.asarray(self.u, dtype=float).reshape(len(self.t), -1)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if len(self.t) == 0:
            raise ValueError("empty trajectory")
        steps = np.diff(self.t)
        if np.any(np.abs(steps - self.dt) > 1e-6 * max(1.0, self.dt)):
            raise ValueError("samples must be uniformly spaced by dt")
        if abs(self.t[0]) > 1e-9:
            raise ValueError("trajectory must start at t = 0")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self):
        return list(zip(self.t, self.x, self.u))

    @property
    def cost(self) -> float:
        return float(np.sum(self.u * self.u) * self.dt)


def window(a: float, b: float, dt: float) -> tuple[int, int]:
    """Inclusive sample-index range for the time window [a, b]."""
    lo = math.ceil(a / dt - 0.5 - 1e-9)
    hi = math.floor(b / dt + 0.5 + 1e-9)
    return max(lo, 0), max(hi, lo)


def _slide(v: np.ndarray, lo: int, hi: int, reduce) -> np.ndarray:
    # out[k] = reduce(v[k+lo .. k+hi]), ignoring samples past the end
    width = hi - lo + 1
    padded = np.concatenate([v[lo:], np.full(width - 1 + min(lo, len(v)), np.nan)])
    views = sliding_window_view(padded, width)[: len(v)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return reduce(views, axis=1)


def _signal(traj: Trajectory, s: Subtask) -> np.ndarray:
    """Robustness of ``s`` evaluated at every sample as start time."""
    dt = traj.dt
    v = s.inner.exact_many(traj.x)
    lo, hi = window(s.op.a, s.op.b, dt)
    kind = s.op.kind
    if kind is OpKind.F:
        return _slide(v, lo, hi, np.nanmax)
    if kind is OpKind.G:
        return _slide(v, lo, hi, np.nanmin)
    if kind is OpKind.U:
        left = np.minimum.accumulate(s.left_inner.exact_many(traj.x))
        # only used from start time 0, where the prefix is the whole history
        return _slide(np.minimum(left, v), lo, hi, np.nanmax)
    clo, chi = window(s.op.c, s.op.d, dt)
    if kind is OpKind.FG:
        return _slide(_slide(v, clo, chi, np.nanmin), lo, hi, np.nanmax)
    return _slide(_slide(v, clo, chi, np.nanmax), lo, hi, np.nanmin)


def _check_length(traj: Trajectory, T: float) -> None:
    if traj.t[-1] < T - traj.dt / 2 - 1e-9:
        raise TrajectoryTooShort(f"trajectory ends at t={traj.t[-1]:g} but the horizon is {T:g}")


def subtask_robustness(traj: Trajectory, s: Subtask) -> float:
    _check_length(traj, s.op.horizon)
    return float(_signal(traj, s)[0])


def group_robustness(traj: Trajectory, spec: SpecTree) -> list[float]:
    _check_length(traj, horizon(spec))
    return [max(float(_signal(traj, s)[0]) for s in g) for g in spec.groups]


def monitor(traj: Trajectory, spec: SpecTree) -> tuple[bool, float]:
    """Exact satisfaction verdict and robustness at time 0."""
    rob = group_robustness(traj, spec)
    value = min(rob) if rob else math.inf
    return value >= 0.0, value
