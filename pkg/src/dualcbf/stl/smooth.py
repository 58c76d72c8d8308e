"""Log-sum-exp smooth minimum and softmax-weighted smooth maximum.

Both under-approximate their exact counterpart, which is what makes the
resulting robustness sound: a positive smooth value implies a positive
exact one.
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, softmax

DEFAULT_BETA = 30.0


def _check(c, beta):
    c = np.asarray(c, dtype=float).ravel()
    if c.size == 0:
        raise ValueError("need at least one value")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return c


def smooth_min(c, beta: float = DEFAULT_BETA) -> float:
    c = _check(c, beta)
    val = -logsumexp(-beta * c) / beta
    # guard against roundoff pushing the value above the true minimum
    return float(min(val, c.min()))


def smooth_min_grad(c, beta: float = DEFAULT_BETA) -> tuple[float, np.ndarray]:
    c = _check(c, beta)
    return smooth_min(c, beta), softmax(-beta * c)


def smooth_max(c, beta: float = DEFAULT_BETA) -> float:
    c = _check(c, beta)
    val = float(softmax(beta * c) @ c)
    return min(val, float(c.max()))


def smooth_max_grad(c, beta: float = DEFAULT_BETA) -> tuple[float, np.ndarray]:
    c = _check(c, beta)
    w = softmax(beta * c)
    val = float(w @ c)
    return min(val, float(c.max())), w * (1.0 + beta * (c - val))


def smooth_robustness(x, inner, beta: float = DEFAULT_BETA) -> tuple[float, np.ndarray]:
    """Smooth static robustness of a bound DNF formula and its state gradient.

    Smooth-min over each clause's signed distances, then smooth-max across
    clauses; the gradient follows by the chain rule.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vals, grads = [], []
    for clause in inner.clauses:
        sd = [p.set.signed_distance(x) for p in clause]
        v, w = smooth_min_grad([s[0] for s in sd], beta)
        vals.append(v)
        grads.append(np.sum([wi * s[1] for wi, s in zip(w, sd)], axis=0))
    val, w = smooth_max_grad(vals, beta)
    return val, np.sum([wi * g for wi, g in zip(w, grads)], axis=0)
