"""Offspring laws on the non-negative integers.

Every law exposes its generating function ``f(s)``, the stable complement
``1 - f(1 - u)``, the first three factorial moments at 1, tail functionals
and exact samplers (including exact sums of many i.i.d. draws).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import ClassVar, Iterable, Sequence

import numpy as np
from scipy import special, stats

# absolute tolerance for neglected tails of y^2 f[y]
TAIL_TOL = 1e-12
# FiniteSupport probabilities are renormalised when within this of 1
NORMALIZE_TOL = 1e-9
# upper limit on draws materialised at once by the explicit summation route
_DRAW_CHUNK = 1 << 22


class DistributionError(ValueError):
    """Invalid parameters for an offspring law."""


def _check_unit(name: str, value: float, *, open_low=False, open_high=False) -> float:
    value = float(value)
    low_ok = value > 0 if open_low else value >= 0
    high_ok = value < 1 if open_high else value <= 1
    if not (math.isfinite(value) and low_ok and high_ok):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise DistributionError(f"{name}={value!r} outside {lo}0, 1{hi}")
    return value


def _check_int(name: str, value, minimum: int = 0) -> int:
    if isinstance(value, float):
        if not value.is_integer():
            raise DistributionError(f"{name}={value!r} is not an integer")
        value = int(value)
    value = int(value)
    if value < minimum:
        raise DistributionError(f"{name}={value} must be >= {minimum}")
    return value


def _as_unit_array(s):
    arr = np.asarray(s, dtype=float)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise DistributionError(f"argument outside [0, 1]: {s!r}")
    return arr


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


class OffspringDistribution:
    """Base class for a single generation's offspring law.

    Subclasses are frozen dataclasses.  They provide the pmf, the pgf and
    its complement, closed-form factorial moments and samplers; derived
    functionals (tails, restricted moments, shape data) are shared here.
    """

    family: ClassVar[str] = "abstract"

    # ---- per-family hooks ----------------------------------------------
    def _pgf(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _complement(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _moments(self) -> tuple[float, float, float]:
        raise NotImplementedError

    def _pmf(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _sf(self, k: int) -> float:
        """P(Y > k)."""
        raise NotImplementedError

    def _draw(self, size: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _sum_shortcut(self, z: np.ndarray, rng: np.random.Generator):
        """Exact law of the sum of ``z`` draws, or None if no identity is known."""
        return None

    #: largest possible value, None for unbounded support
    max_value: ClassVar[int | None] = None

    # ---- validation ----------------------------------------------------
    def _validate(self):
        m, f2, f3 = self.factorial_moments()
        if not (math.isfinite(m) and m > 0):
            raise DistributionError(f"{self!r}: mean must be finite and positive, got {m}")
        if not (math.isfinite(f2) and math.isfinite(f3)):
            raise DistributionError(f"{self!r}: factorial moments must be finite")

    # ---- generating function -------------------------------------------
    def pgf(self, s):
        """f(s) for s in [0, 1] (scalar or array)."""
        return _unwrap(np.clip(self._pgf(_as_unit_array(s)), 0.0, 1.0))

    def pgf_complement(self, u):
        """1 - f(1 - u), evaluated without cancellation for small u."""
        # rounding may push the value a few ulps past 1
        return _unwrap(np.clip(self._complement(_as_unit_array(u)), 0.0, 1.0))

    # ---- moments -------------------------------------------------------
    @cached_property
    def _cached_moments(self) -> tuple[float, float, float]:
        return tuple(float(v) for v in self._moments())

    def factorial_moments(self) -> tuple[float, float, float]:
        """(f'(1), f''(1), f'''(1))."""
        return self._cached_moments

    @property
    def mean(self) -> float:
        return self._cached_moments[0]

    @property
    def f2(self) -> float:
        return self._cached_moments[1]

    @property
    def f3(self) -> float:
        return self._cached_moments[2]

    @property
    def variance(self) -> float:
        m, f2, _ = self._cached_moments
        return f2 + m - m * m

    @property
    def nu(self) -> float:
        """Normalised second factorial moment f''(1)/f'(1)^2."""
        return self.f2 / self.mean**2

    @property
    def rho(self) -> float:
        """Normalised variance, nu + 1/m - 1."""
        return self.nu + 1.0 / self.mean - 1.0

    # ---- pmf -----------------------------------------------------------
    def pmf(self, y):
        y = np.asarray(y)
        out = np.zeros(y.shape, dtype=float)
        ok = y >= 0
        if self.max_value is not None:
            ok &= y <= self.max_value
        out[ok] = self._pmf(y[ok].astype(np.int64))
        return _unwrap(out)

    @cached_property
    def p0(self) -> float:
        return float(self.pmf(0))

    @cached_property
    def p1(self) -> float:
        return float(self.pmf(1))

    def support_bound(self, tol: float = TAIL_TOL) -> int:
        """Smallest checked K with sum_{y>K} y^2 f[y] < tol."""
        if self.max_value is not None:
            return self.max_value
        sd = math.sqrt(max(self.variance, 0.0))
        K = int(self.mean + 12 * sd) + 32
        while True:
            y = np.arange(K - 1, K + 1)
            t = y.astype(float) ** 2 * self._pmf(y)
            if t[1] == 0.0:
                return K
            r = t[1] / t[0] if t[0] > 0 else 1.0
            # terms y^2 f[y] have decreasing ratios past the mode for the
            # unbounded families here, so a geometric tail bound is valid
            if r < 1.0 and t[1] * r / (1.0 - r) < tol:
                return K
            K *= 2

    @cached_property
    def pmf_table(self) -> np.ndarray:
        """f[0..K] with K = support_bound(TAIL_TOL)."""
        K = self.support_bound()
        table = self._pmf(np.arange(K + 1))
        table.setflags(write=False)
        return table

    def truncated_pmf(self, K: int) -> tuple[np.ndarray, float]:
        """(f[0], ..., f[K]) and the remainder mass P(Y > K)."""
        K = int(K)
        if K < 0:
            raise ValueError("K must be non-negative")
        vec = np.asarray(self.pmf(np.arange(K + 1)), dtype=float).reshape(-1)
        if self.max_value is not None and K >= self.max_value:
            return vec, 0.0
        return vec, float(self._sf(K))

    # ---- tail functionals ---------------------------------------------
    def tail_second_moment(self, a: float) -> float:
        """E[Y^2; Y > a]."""
        if a < 0:
            raise ValueError("a must be non-negative")
        table = self.pmf_table
        start = int(math.floor(a)) + 1
        if start >= len(table):
            return 0.0
        y = np.arange(start, len(table), dtype=float)
        return math.fsum(y * y * table[start:])

    def restricted_moments(self) -> tuple[float, float, float]:
        """(E[Y; Y>=2], E[Y^2; Y>=2], P(Y>=1))."""
        table = self.pmf_table
        y = np.arange(2, len(table), dtype=float)
        w = table[2:]
        e1 = math.fsum(y * w)
        e2 = math.fsum(y * y * w)
        p_ge1 = float(self._sf(0))
        if p_ge1 <= 0:
            raise DistributionError(f"{self!r}: P(Y >= 1) = 0")
        return e1, e2, p_ge1

    def conditional_mean_positive(self) -> float:
        """E[Y | Y >= 1]."""
        return self.mean / float(self._sf(0))

    # ---- sampling ------------------------------------------------------
    def sample(self, rng: np.random.Generator) -> int:
        return int(self._draw(1, rng)[0])

    def sample_many(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self._draw(int(size), rng), dtype=np.int64)

    def sample_sums(self, z, rng: np.random.Generator, shortcut: bool = False) -> np.ndarray:
        """For each entry z_i, the sum of z_i independent draws (exact).

        With ``shortcut`` the family's convolution identity is used when it
        has one; otherwise every individual variate is drawn.
        """
        z = np.asarray(z, dtype=np.int64)
        if shortcut:
            out = self._sum_shortcut(z, rng)
            if out is not None:
                return np.asarray(out, dtype=np.int64)
        return self._explicit_sums(z, rng)

    def _explicit_sums(self, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        out = np.zeros(z.shape, dtype=np.int64)
        n = len(z)
        i = 0
        while i < n:
            if z[i] > _DRAW_CHUNK:
                left = int(z[i])
                total = 0
                while left:
                    take = min(left, _DRAW_CHUNK)
                    total += int(self.sample_many(take, rng).sum())
                    left -= take
                out[i] = total
                i += 1
                continue
            csum = np.cumsum(z[i:])
            j = i + int(np.searchsorted(csum, _DRAW_CHUNK, side="right"))
            j = max(j, i + 1)
            block = z[i:j]
            total = int(block.sum())
            if total:
                draws = self.sample_many(total, rng)
                starts = np.concatenate(([0], np.cumsum(block)[:-1]))
                nz = block > 0
                out[i:j][nz] = np.add.reduceat(draws, starts[nz])
            i = j
        return out

    # ---- misc ----------------------------------------------------------
    @property
    def has_mass_above_one(self) -> bool:
        return self.f2 > 0


def _finite_complement(values: np.ndarray, probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    # sum_y f[y] (1 - (1-u)^y), each term via expm1/log1p
    u = np.asarray(u, dtype=float)
    pos = values > 0
    v = values[pos].astype(float)
    p = probs[pos]
    flat = u.reshape(-1)
    out = np.empty(flat.shape)
    with np.errstate(divide="ignore"):
        lg = np.log1p(-flat)
    for i, l in enumerate(lg):
        if l == -np.inf:
            out[i] = p.sum()
        else:
            out[i] = np.dot(p, -np.expm1(v * l))
    return out.reshape(u.shape)


def _finite_pgf(values: np.ndarray, probs: np.ndarray, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    flat = s.reshape(-1)
    out = np.array([np.dot(probs, np.power(x, values.astype(float))) for x in flat])
    return out.reshape(s.shape)


class _FiniteMixin(OffspringDistribution):
    """Shared machinery for laws stored as explicit (value, probability) atoms."""

    @property
    def values(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def probs(self) -> np.ndarray:
        raise NotImplementedError

    def _pgf(self, s):
        return _finite_pgf(self.values, self.probs, s)

    def _complement(self, u):
        return _finite_complement(self.values, self.probs, u)

    def _moments(self):
        y = self.values.astype(float)
        p = self.probs
        return (
            math.fsum(y * p),
            math.fsum(y * (y - 1) * p),
            math.fsum(y * (y - 1) * (y - 2) * p),
        )

    def _pmf(self, y):
        dense = self._dense
        return dense[np.clip(y, 0, len(dense) - 1)] * (y < len(dense))

    @cached_property
    def _dense(self) -> np.ndarray:
        dense = np.zeros(int(self.values.max()) + 1)
        np.add.at(dense, self.values, self.probs)
        return dense

    def _sf(self, k):
        return math.fsum(self.probs[self.values > k])

    @cached_property
    def _cdf(self) -> np.ndarray:
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return cdf

    def _draw(self, size, rng):
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        return self.values[np.minimum(idx, len(self.values) - 1)]

    def _sum_shortcut(self, z, rng):
        if len(self.values) > 64:
            return None
        counts = rng.multinomial(z, self.probs)
        return counts @ self.values

    def tail_second_moment(self, a):
        if a < 0:
            raise ValueError("a must be non-negative")
        y = self.values.astype(float)
        sel = y > a
        return math.fsum(y[sel] ** 2 * self.probs[sel])

    def restricted_moments(self):
        y = self.values.astype(float)
        p = self.probs
        sel = y >= 2
        p_ge1 = math.fsum(p[y >= 1])
        if p_ge1 <= 0:
            raise DistributionError(f"{self!r}: P(Y >= 1) = 0")
        return math.fsum(y[sel] * p[sel]), math.fsum(y[sel] ** 2 * p[sel]), p_ge1

    def support_bound(self, tol=TAIL_TOL):
        return int(self.values.max())


@dataclass(frozen=True, eq=False)
class FiniteSupport(_FiniteMixin):
    """Arbitrary law with finitely many atoms ``{value: probability}``."""

    atoms: tuple[tuple[int, float], ...]
    family: ClassVar[str] = "finite"

    def __init__(self, atoms):
        if isinstance(atoms, dict):
            atoms = atoms.items()
        merged: dict[int, float] = {}
        for value, prob in atoms:
            value = _check_int("value", value)
            prob = float(prob)
            if not math.isfinite(prob) or prob < 0:
                raise DistributionError(f"probability {prob!r} for value {value} is invalid")
            merged[value] = merged.get(value, 0.0) + prob
        total = math.fsum(merged.values())
        if not merged or abs(total - 1.0) > NORMALIZE_TOL:
            raise DistributionError(f"probabilities sum to {total!r}, not 1")
        items = tuple(sorted((v, p / total) for v, p in merged.items() if p > 0))
        object.__setattr__(self, "atoms", items)
        self._validate()

    @cached_property
    def values(self):
        return np.array([v for v, _ in self.atoms], dtype=np.int64)

    @cached_property
    def probs(self):
        return np.array([p for _, p in self.atoms], dtype=float)

    @property
    def max_value(self):
        return int(self.values.max())

    def __repr__(self):
        inner = ", ".join(f"{v}: {p:.6g}" for v, p in self.atoms)
        return f"FiniteSupport({{{inner}}})"

    def __eq__(self, other):
        return isinstance(other, FiniteSupport) and self.atoms == other.atoms

    def __hash__(self):
        return hash(self.atoms)


def dirac(k: int) -> FiniteSupport:
    """Point mass at ``k``."""
    return FiniteSupport({k: 1.0})


@dataclass(frozen=True)
class Binary(_FiniteMixin):
    """Mass p at 2 and 1 - p at 0."""

    p: float
    family: ClassVar[str] = "binary"
    max_value: ClassVar[int] = 2

    def __post_init__(self):
        object.__setattr__(self, "p", _check_unit("p", self.p, open_low=True))
        self._validate()

    @cached_property
    def values(self):
        return np.array([0, 2], dtype=np.int64)

    @cached_property
    def probs(self):
        return np.array([1 - self.p, self.p])

    def _pgf(self, s):
        return 1 - self.p + self.p * s * s

    def _complement(self, u):
        return self.p * u * (2 - u)

    def _moments(self):
        return 2 * self.p, 2 * self.p, 0.0

    def _sum_shortcut(self, z, rng):
        return 2 * rng.binomial(z, self.p)


@dataclass(frozen=True)
class Symmetric(_FiniteMixin):
    """Mass p/2 at 0 and at 2, 1 - p at 1 (mean one)."""

    p: float
    family: ClassVar[str] = "symmetric"
    max_value: ClassVar[int] = 2

    def __post_init__(self):
        object.__setattr__(self, "p", _check_unit("p", self.p))
        self._validate()

    @cached_property
    def values(self):
        return np.array([0, 1, 2], dtype=np.int64)

    @cached_property
    def probs(self):
        return np.array([self.p / 2, 1 - self.p, self.p / 2])

    def _pgf(self, s):
        return self.p / 2 + (1 - self.p) * s + self.p / 2 * s * s

    def _complement(self, u):
        return u - self.p / 2 * u * u

    def _moments(self):
        return 1.0, self.p, 0.0

    def restricted_moments(self):
        return self.p, 2 * self.p, 1 - self.p / 2

    def _sum_shortcut(self, z, rng):
        # c offspring differ from 1; each of them is a 2 with probability 1/2
        c = rng.binomial(z, self.p)
        return z - c + 2 * rng.binomial(c, 0.5)


@dataclass(frozen=True)
class Binomial(_FiniteMixin):
    m: int
    p: float
    family: ClassVar[str] = "binomial"

    def __post_init__(self):
        object.__setattr__(self, "m", _check_int("m", self.m, 1))
        object.__setattr__(self, "p", _check_unit("p", self.p, open_low=True))
        self._validate()

    @property
    def max_value(self):
        return self.m

    @cached_property
    def values(self):
        return np.arange(self.m + 1, dtype=np.int64)

    @cached_property
    def probs(self):
        return stats.binom.pmf(np.arange(self.m + 1), self.m, self.p)

    def _pgf(self, s):
        return (1 - self.p + self.p * s) ** self.m

    def _complement(self, u):
        return -np.expm1(self.m * np.log1p(-self.p * u))

    def _moments(self):
        m, p = self.m, self.p
        return m * p, m * (m - 1) * p**2, m * (m - 1) * (m - 2) * p**3

    def _draw(self, size, rng):
        return rng.binomial(self.m, self.p, size)

    def _sum_shortcut(self, z, rng):
        return rng.binomial(z * self.m, self.p)


@dataclass(frozen=True)
class Hypergeometric(_FiniteMixin):
    """Number of marked items in a sample of m from N items, K of them marked."""

    N: int
    K: int
    m: int
    family: ClassVar[str] = "hypergeometric"

    def __post_init__(self):
        N = _check_int("N", self.N, 1)
        K = _check_int("K", self.K, 0)
        m = _check_int("m", self.m, 0)
        if K > N or m > N:
            raise DistributionError(f"need K <= N and m <= N, got N={N}, K={K}, m={m}")
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "m", m)
        self._validate()

    @property
    def max_value(self):
        return min(self.m, self.K)

    @cached_property
    def values(self):
        lo = max(0, self.m + self.K - self.N)
        return np.arange(lo, min(self.m, self.K) + 1, dtype=np.int64)

    @cached_property
    def probs(self):
        y = self.values.astype(float)
        N, K, m = float(self.N), float(self.K), float(self.m)
        gl = special.gammaln
        logp = (
            gl(K + 1) - gl(y + 1) - gl(K - y + 1)
            + gl(N - K + 1) - gl(m - y + 1) - gl(N - K - m + y + 1)
            - (gl(N + 1) - gl(m + 1) - gl(N - m + 1))
        )
        p = np.exp(logp)
        return p / math.fsum(p)

    def _moments(self):
        N, K, m = self.N, self.K, self.m

        def falling(x, r):
            out = 1.0
            for i in range(r):
                out *= x - i
            return out

        def fm(r):
            den = falling(N, r)
            return falling(m, r) * falling(K, r) / den if den else 0.0

        return fm(1), fm(2), fm(3)

    def _draw(self, size, rng):
        return rng.hypergeometric(self.K, self.N - self.K, self.m, size)

    def _sum_shortcut(self, z, rng):
        return None


@dataclass(frozen=True)
class Poisson(OffspringDistribution):
    lam: float
    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise DistributionError(f"lambda={lam!r} must be positive")
        object.__setattr__(self, "lam", lam)
        self._validate()

    def _pgf(self, s):
        return np.exp(self.lam * (s - 1))

    def _complement(self, u):
        return -np.expm1(-self.lam * u)

    def _moments(self):
        return self.lam, self.lam**2, self.lam**3

    def _pmf(self, y):
        return stats.poisson.pmf(y, self.lam)

    def _sf(self, k):
        return stats.poisson.sf(k, self.lam)

    def _draw(self, size, rng):
        return rng.poisson(self.lam, size)

    def _sum_shortcut(self, z, rng):
        return rng.poisson(z * self.lam)


@dataclass(frozen=True)
class LinearFractional(OffspringDistribution):
    """P(Y >= 1) = s1 and Y given Y >= 1 geometric on {1, 2, ...} with success p."""

    p: float
    s1: float
    family: ClassVar[str] = "linear_fractional"

    def __post_init__(self):
        object.__setattr__(self, "p", _check_unit("p", self.p, open_low=True, open_high=True))
        object.__setattr__(self, "s1", _check_unit("s1", self.s1, open_low=True))
        self._validate()

    def _pgf(self, s):
        q = 1 - self.p
        return 1 - self.s1 + self.s1 * self.p * s / (1 - q * s)

    def _complement(self, u):
        q = 1 - self.p
        return self.s1 * u / (self.p + q * u)

    def _moments(self):
        p, q, s1 = self.p, 1 - self.p, self.s1
        return s1 / p, s1 * 2 * q / p**2, s1 * 6 * q**2 / p**3

    def _pmf(self, y):
        y = np.asarray(y)
        q = 1 - self.p
        out = self.s1 * self.p * np.power(q, np.maximum(y - 1, 0).astype(float))
        return np.where(y == 0, 1 - self.s1, out)

    def _sf(self, k):
        return self.s1 * (1 - self.p) ** k

    def _draw(self, size, rng):
        alive = rng.random(size) < self.s1
        return np.where(alive, rng.geometric(self.p, size), 0)

    def _sum_shortcut(self, z, rng):
        n = rng.binomial(z, self.s1)
        extra = np.zeros_like(n)
        pos = n > 0
        extra[pos] = rng.negative_binomial(n[pos], self.p)
        return n + extra


@dataclass(frozen=True)
class NegativeBinomial(OffspringDistribution):
    """Generating function (p / (1 - (1-p) s))^alpha."""

    alpha: int
    p: float
    family: ClassVar[str] = "negative_binomial"

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_int("alpha", self.alpha, 1))
        object.__setattr__(self, "p", _check_unit("p", self.p, open_low=True, open_high=True))
        self._validate()

    def _pgf(self, s):
        return (self.p / (1 - s * (1 - self.p))) ** self.alpha

    def _complement(self, u):
        q = 1 - self.p
        return -np.expm1(-self.alpha * np.log1p(q * u / self.p))

    def _moments(self):
        a, r = self.alpha, (1 - self.p) / self.p
        return a * r, a * (a + 1) * r**2, a * (a + 1) * (a + 2) * r**3

    def _pmf(self, y):
        return stats.nbinom.pmf(y, self.alpha, self.p)

    def _sf(self, k):
        return stats.nbinom.sf(k, self.alpha, self.p)

    def _draw(self, size, rng):
        return rng.negative_binomial(self.alpha, self.p, size)

    def _sum_shortcut(self, z, rng):
        out = np.zeros_like(z)
        pos = z > 0
        out[pos] = rng.negative_binomial(z[pos] * self.alpha, self.p)
        return out


FAMILIES: dict[str, type[OffspringDistribution]] = {
    cls.family: cls
    for cls in (FiniteSupport, Binary, Symmetric, Binomial, Hypergeometric,
                Poisson, LinearFractional, NegativeBinomial)
}


def pgf_eval(d: OffspringDistribution, s: float) -> float:
    """f(s); raises DistributionError when s is outside [0, 1]."""
    return d.pgf(s)
