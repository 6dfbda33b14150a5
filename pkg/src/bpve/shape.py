"""Shape function of an offspring law and certificates for its bounds.

For a law f with mean m the shape function is defined by

    1 / (1 - f(s)) = 1 / (m (1 - s)) + phi(s),    0 <= s < 1,

and extended by phi(1) = nu / 2.  Near s = 1 the defining difference
cancels catastrophically, so it is replaced by the first-order expansion
phi(1) - (1 - s) phi'(1) built from the cached factorial moments.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .offspring import LinearFractional, OffspringDistribution

# NearOne is used when 1 - s < NEAR_ONE * max(1, 1/m)
NEAR_ONE = 1e-6


class Regime(str, enum.Enum):
    DIRECT = "direct"
    NEAR_ONE = "near_one"


@dataclass(frozen=True)
class ShapeEvaluation:
    s: float
    phi: float
    regime: Regime
    phi0: float
    phi1: float


def phi_at_one(d: OffspringDistribution) -> float:
    return d.nu / 2


def phi_prime_at_one(d: OffspringDistribution) -> float:
    m, f2, f3 = d.factorial_moments()
    return f3 / (6 * m * m) - f2 * f2 / (4 * m**3)


def near_one_threshold(d: OffspringDistribution) -> float:
    return NEAR_ONE * max(1.0, 1.0 / d.mean)


def phi_complement(d: OffspringDistribution, u: float, regime: Regime | None = None) -> tuple[float, Regime]:
    """phi(1 - u) and the regime used; ``regime`` forces a route."""
    if not d.has_mass_above_one:
        return 0.0, Regime.DIRECT
    if isinstance(d, LinearFractional):
        # 1 - f(1-u) = s1 u / (p + (1-p) u), so phi is the constant (1-p)/s1
        return (1 - d.p) / d.s1, Regime.DIRECT
    if regime is None:
        regime = Regime.NEAR_ONE if u < near_one_threshold(d) else Regime.DIRECT
    if regime is Regime.NEAR_ONE:
        return phi_at_one(d) - u * phi_prime_at_one(d), regime
    if u <= 0:
        raise ValueError("direct evaluation needs s < 1")
    c = d.pgf_complement(u)
    return 1.0 / c - 1.0 / (d.mean * u), regime


def phi_value(d: OffspringDistribution, s: float) -> float:
    """phi(s) as a bare float."""
    if not 0 <= s <= 1:
        raise ValueError(f"s={s!r} outside [0, 1]")
    return phi_complement(d, 1.0 - s)[0]


def phi(d: OffspringDistribution, s: float, regime: Regime | None = None) -> ShapeEvaluation:
    """Evaluate the shape function at s in [0, 1]."""
    if not 0 <= s <= 1:
        raise ValueError(f"s={s!r} outside [0, 1]")
    value, used = phi_complement(d, 1.0 - s, regime)
    return ShapeEvaluation(
        s=float(s),
        phi=value,
        regime=used,
        phi0=phi_complement(d, 1.0)[0],
        phi1=phi_at_one(d),
    )


def phi_grid(d: OffspringDistribution, grid: Iterable[float]) -> np.ndarray:
    return np.array([phi_value(d, float(s)) for s in grid])


@dataclass(frozen=True)
class ShapeCertificate:
    """Grid check of phi(0)/2 <= phi(s) <= 2 phi(1)."""

    phi_min: float
    phi_max: float
    phi0: float
    phi1: float
    lower_ok: bool
    upper_ok: bool

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok


def shape_certificate(d: OffspringDistribution, grid: Sequence[float] | None = None,
                       rtol: float = 1e-12) -> ShapeCertificate:
    if grid is None:
        grid = np.linspace(0.0, 1.0, 101)
    values = phi_grid(d, grid)
    p0, p1 = phi_value(d, 0.0), phi_at_one(d)
    lo, hi = float(values.min()), float(values.max())
    # rtol absorbs rounding when a bound is attained (point masses)
    slack = rtol * max(p0, p1, 1e-300)
    return ShapeCertificate(lo, hi, p0, p1, p0 / 2 <= lo + slack, hi <= 2 * p1 + slack)


def deviation_envelope(d: OffspringDistribution, s: float, a: int) -> float:
    """Upper bound for sup_{s <= t <= 1} |phi(1) - phi(t)|."""
    if not 0 <= s <= 1:
        raise ValueError(f"s={s!r} outside [0, 1]")
    if a < 1:
        raise ValueError("a must be a positive integer")
    m, nu = d.mean, d.nu
    return 2 * nu * a * (1 - s) + 2 / m**2 * d.tail_second_moment(a) + 2 * m * nu**2 * (1 - s)


def shape_sup_deviation(d: OffspringDistribution, s: float, points: int = 2001) -> float:
    """Grid estimate of sup_{s <= t <= 1} |phi(1) - phi(t)|."""
    ts = np.linspace(s, 1.0, points)
    return float(np.max(np.abs(phi_at_one(d) - phi_grid(d, ts))))


def phi_prime_bounds(d: OffspringDistribution) -> tuple[float, float, float]:
    """(lower, upper) bounds on phi'(s) over [0, 1], and phi'(1)."""
    m, f2, f3 = d.factorial_moments()
    lower = -f2 * f2 / m**3
    upper = 2 * f3 / (3 * m * m) + 2 * f2 * f2 / m**3
    return lower, upper, phi_prime_at_one(d)
