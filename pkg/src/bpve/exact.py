"""Exact finite-horizon quantities of a process in varying environment.

Survival probabilities come from the backward recursion
t_n = 0, t_k = f_{k+1}(t_{k+1}); it is run on the complements
u_k = 1 - t_k so that tiny survival probabilities keep full relative
precision.  Identities that mix huge and tiny numbers are evaluated in
log space.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import logsumexp

from .environment import Environment
from .ks import ks_exponential
from .shape import phi_complement

# products shorter than this use schoolbook convolution
_FFT_MIN = 512


class SandwichViolation(ArithmeticError):
    """Survival outside the second-moment bounds; the (A) constant was invalid."""


class RegimeError(ValueError):
    """Quantity undefined for this environment (e.g. a_n = 0)."""


@dataclass(frozen=True)
class ExactLaw:
    """t[k] = f_{k,n}(0) for k = 0..n and u = 1 - t."""

    n: int
    t: np.ndarray
    u: np.ndarray
    survival: float
    a_n: float
    pmf: np.ndarray | None = None
    remainder: float | None = None


def _complements(env: Environment, n: int, u_top: float, stop: int = 0) -> np.ndarray:
    """u[l] = 1 - f_{l,n}(1 - u_top) for l = stop..n (index l - stop)."""
    u = np.empty(n - stop + 1)
    u[-1] = u_top
    for l in range(n, stop, -1):
        u[l - 1 - stop] = env.realize(l).pgf_complement(u[l - stop])
    return u


def yaglom_scale(env: Environment, n: int) -> float:
    """a_n = (mu_n / 2) S_nu(n)."""
    tab = env.moment_table(n)
    return math.exp(tab.log_mu[n] + tab.log_S_nu[n] - math.log(2)) if tab.log_S_nu[n] > -math.inf else 0.0


def survival(env: Environment, n: int) -> tuple[float, ExactLaw]:
    """P(Z_n > 0) and the backward-recursion values."""
    if n < 1:
        raise ValueError("n must be >= 1")
    u = _complements(env, n, 1.0)
    law = ExactLaw(n=n, t=1.0 - u, u=u, survival=float(u[0]), a_n=yaglom_scale(env, n))
    return law.survival, law


def survival_curve(env: Environment, n: int) -> np.ndarray:
    """P(Z_k > 0) for k = 1..n (O(n^2) pgf evaluations)."""
    return np.array([_complements(env, k, 1.0)[0] for k in range(1, n + 1)])


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    log_lhs: float
    log_rhs: float
    terms: np.ndarray

    @property
    def residual(self) -> float:
        """|lhs - rhs| / lhs, from the logarithms."""
        if self.log_lhs == self.log_rhs:
            return 0.0
        return abs(math.expm1(self.log_rhs - self.log_lhs))


def _shape_terms(env: Environment, u: np.ndarray, log_mu: np.ndarray, k: int, n: int) -> np.ndarray:
    """log( phi_l(1 - u_l) / mu_{l-1} ) for l = k+1..n; u indexed from k."""
    out = np.empty(n - k)
    for l in range(k + 1, n + 1):
        val, _ = phi_complement(env.realize(l), u[l - k])
        out[l - k - 1] = (math.log(val) if val > 0 else -math.inf) - log_mu[l - 1]
    return out


def composition_identity(env: Environment, k: int, n: int, s: float) -> IdentityCheck:
    """Both sides of 1/(1 - f_{k,n}(s)) = mu_k/(mu_n (1-s)) + mu_k sum phi_l(f_{l,n}(s))/mu_{l-1}."""
    if not 0 <= k < n:
        raise ValueError("need 0 <= k < n")
    if not 0 <= s < 1:
        raise ValueError("need 0 <= s < 1")
    log_mu = env.moment_table(n).log_mu
    u = _complements(env, n, 1.0 - s, stop=k)
    log_lhs = -math.log(u[0])
    log_terms = _shape_terms(env, u, log_mu, k, n) + log_mu[k]
    log_first = log_mu[k] - log_mu[n] - math.log1p(-s)
    log_rhs = float(logsumexp(np.concatenate(([log_first], log_terms))))
    return IdentityCheck(
        lhs=math.exp(min(log_lhs, 709.0)) if log_lhs < 709 else math.inf,
        rhs=math.exp(log_rhs) if log_rhs < 709 else math.inf,
        log_lhs=log_lhs,
        log_rhs=log_rhs,
        terms=np.exp(log_terms),
    )


def representation_check(env: Environment, n: int) -> IdentityCheck:
    """1/P(Z_n > 0) against 1/mu_n + sum_k phi_k(f_{k,n}(0))/mu_{k-1}.

    ``terms`` holds phi_k(f_{k,n}(0))/mu_{k-1} for k = 1..n.
    """
    return composition_identity(env, 0, n, 0.0)


@dataclass(frozen=True)
class SecondMoments:
    efact: float         # E[Z_n (Z_n - 1)]
    e2_over_mean2: float  # E[Z_n^2] / E[Z_n]^2
    var_w: float          # E[W_n^2] - 1


def second_moments(env: Environment, n: int, rtol: float = 1e-10) -> SecondMoments:
    tab = env.moment_table(n)
    mu = math.exp(tab.log_mu[n])
    s_nu, s_rho = tab.S_nu[n], tab.S_rho[n]
    via_nu = s_nu + 1.0 / mu
    via_rho = s_rho + 1.0
    if abs(via_nu - via_rho) > rtol * max(via_nu, via_rho):
        raise ArithmeticError(f"second-moment routes disagree: {via_nu!r} vs {via_rho!r}")
    return SecondMoments(efact=mu * mu * s_nu, e2_over_mean2=via_nu, var_w=s_rho)


@dataclass(frozen=True)
class Sandwich:
    lower: float
    upper: float
    exact: float
    gamma: float


def paley_zygmund_sandwich(env: Environment, n: int, c_A: float, rtol: float = 1e-12) -> Sandwich:
    """E[Z_n]^2/E[Z_n^2] <= P(Z_n > 0) <= gamma E[Z_n]^2/E[Z_n^2], gamma = max(1, 4 c_A)."""
    tab = env.moment_table(n)
    log_ratio = -float(np.logaddexp(tab.log_S_nu[n], -tab.log_mu[n]))
    lower = math.exp(log_ratio)
    gamma = max(1.0, 4.0 * c_A)
    upper = gamma * lower
    exact, _ = survival(env, n)
    if exact < lower * (1 - rtol) or exact > upper * (1 + rtol):
        raise SandwichViolation(
            f"n={n}: survival {exact!r} outside [{lower!r}, {upper!r}] with gamma={gamma}"
        )
    return Sandwich(lower, upper, exact, gamma)


def conditional_mean_bounds(env: Environment, n: int) -> tuple[float, float, float]:
    """(1, E[Z_n | Z_n > 0], 1 + mu_n S_nu(n))."""
    tab = env.moment_table(n)
    p, _ = survival(env, n)
    mu = math.exp(tab.log_mu[n])
    return 1.0, mu / p, 1.0 + mu * tab.S_nu[n]


# --------------------------------------------------------------------------
# truncated power series

def _mul(x: np.ndarray, y: np.ndarray, K: int) -> np.ndarray:
    if len(x) == 1:
        return x[0] * y
    if len(y) == 1:
        return y[0] * x
    if min(len(x), len(y)) < _FFT_MIN:
        out = np.convolve(x, y)[: K + 1]
    else:
        out = fftconvolve(x, y)[: K + 1]
        np.maximum(out, 0.0, out=out)
    return _trim(out)


def _trim(x: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(x)
    return x[: nz[-1] + 1] if len(nz) else x[:1]


def _add_const(x: np.ndarray, c: float) -> np.ndarray:
    x = x.copy()
    x[0] += c
    return x


def _pow(a: np.ndarray, e: int, K: int) -> np.ndarray:
    result = np.ones(1)
    base = a
    while e:
        if e & 1:
            result = _mul(result, base, K)
        e >>= 1
        if e:
            base = _mul(base, base, K)
    return result


def _substitute(d, a: np.ndarray, K: int) -> np.ndarray:
    """Coefficients of d(a(s)) up to s^K; mass of f beyond its table is dropped."""
    values = getattr(d, "values", None)
    if values is not None and len(values) * 8 < int(values.max()) + 1:
        # sparse atoms: sum_y f[y] a^y with incremental powers
        probs = d.probs
        out = np.zeros(1)
        power, prev = np.ones(1), 0
        for y, p in zip(values, probs):
            power = _mul(power, _pow(a, int(y - prev), K), K)
            prev = int(y)
            term = p * power
            if len(term) > len(out):
                term, out = out, term
            out = out.copy()
            out[: len(term)] += term
        return _trim(out)
    coeffs = d.pmf_table if values is None else np.asarray(d.pmf(np.arange(int(values.max()) + 1)))
    r = np.array([coeffs[-1]])
    for c in coeffs[-2::-1]:
        r = _add_const(_mul(r, a, K), c)
    return _trim(r)


@dataclass(frozen=True)
class TruncatedLaw:
    pmf: np.ndarray
    remainder: float


def compose_pmf(env: Environment, n: int, K: int) -> TruncatedLaw:
    """P(Z_n = j) for j = 0..K; every dropped coefficient goes to ``remainder``."""
    if n < 1 or K < 1:
        raise ValueError("need n >= 1 and K >= 1")
    a, _ = env.realize(n).truncated_pmf(K)
    a = _trim(a)
    for l in range(n - 1, 0, -1):
        a = _substitute(env.realize(l), a, K)
    pmf = np.zeros(K + 1)
    pmf[: len(a)] = a[: K + 1]
    remainder = max(0.0, 1.0 - math.fsum(pmf))
    if remainder > 0.5:
        warnings.warn(f"truncation at K={K} leaves remainder mass {remainder:.3g}", stacklevel=2)
    return TruncatedLaw(pmf, remainder)


@dataclass(frozen=True)
class YaglomLaw:
    a_n: float
    survival: float
    conditional_pmf: np.ndarray  # P(Z_n = j | Z_n > 0), j = 1..K
    ks: float
    ks_band: float
    kolmogorov_ratio: float
    remainder: float

    def cdf_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x_j = j/a_n, conditional CDF at x_j, 1 - e^{-x_j}) over the support."""
        j = np.arange(1, len(self.conditional_pmf) + 1)
        keep = self.conditional_pmf > 0
        x = j[keep] / self.a_n
        return x, np.cumsum(self.conditional_pmf)[keep], -np.expm1(-x)


def yaglom_law(env: Environment, n: int, K: int) -> YaglomLaw:
    """Exact truncated law of Z_n / a_n given Z_n > 0, compared with Exp(1)."""
    a_n = yaglom_scale(env, n)
    if not (a_n > 0 and math.isfinite(a_n)):
        raise RegimeError(f"a_n = {a_n!r}: not in the critical regime")
    p, _ = survival(env, n)
    law = compose_pmf(env, n, K)
    cond = law.pmf[1:] / p
    keep = cond > 0
    j = np.arange(1, K + 1)[keep]
    ks = ks_exponential(j / a_n, cond[keep], include_tail=False)
    band = law.remainder / p
    tab = env.moment_table(n)
    return YaglomLaw(
        a_n=a_n,
        survival=p,
        conditional_pmf=cond,
        ks=ks,
        ks_band=band,
        kolmogorov_ratio=p * tab.S_nu[n] / 2,
        remainder=law.remainder,
    )
