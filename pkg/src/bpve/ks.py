"""Kolmogorov distance between a discrete law on [0, inf) and Exp(1)."""
from __future__ import annotations

import numpy as np


def exp_cdf(x):
    return -np.expm1(-np.asarray(x, dtype=float))


def ks_exponential(points, masses, include_tail: bool = True) -> float:
    """sup_x |F(x) - (1 - e^{-x})| for the step CDF with jumps ``masses`` at ``points``.

    ``points`` must be strictly increasing and non-negative.  If the masses
    sum to less than one the deficit is treated as lying beyond the last
    point; with ``include_tail=False`` the supremum is restricted to
    x <= points[-1].
    """
    x = np.asarray(points, dtype=float)
    w = np.asarray(masses, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise ValueError("points and masses must be 1-d arrays of equal length")
    if len(x) == 0:
        return 1.0
    if np.any(np.diff(x) <= 0) or x[0] < 0:
        raise ValueError("points must be strictly increasing and non-negative")
    F = np.cumsum(w)
    F_left = np.concatenate(([0.0], F[:-1]))
    G = exp_cdf(x)
    d = max(float(np.max(F - G)), float(np.max(G - F_left)))
    if include_tail:
        d = max(d, 1.0 - float(F[-1]))
    return d


def ks_exponential_sample(values) -> float:
    """Kolmogorov distance between the empirical law of ``values`` and Exp(1)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty sample")
    pts, counts = np.unique(v, return_counts=True)
    return ks_exponential(pts, counts / v.size)
