"""Regularity constants, the extinction-criteria panel and classification.

All asymptotic statements are replaced by windowed finite-horizon proxies:
a partial sum counts as *converged* when its average increment per
generation over the last 10% of the horizon, relative to its current value,
is below ``tol.tail``.  The proxies are horizon-relative and are reported
alongside every verdict.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .environment import Environment
from .offspring import OffspringDistribution

# search cap for the (B) constant
CB_CAP = 1e9


# --------------------------------------------------------------------------
# per-law constants

def c_A(d: OffspringDistribution) -> float:
    """Smallest c with E[Y^2; Y>=2] <= c E[Y; Y>=2] E[Y | Y>=1]."""
    e1, e2, p_ge1 = d.restricted_moments()
    if e1 <= 0:
        return 0.0
    return e2 / (e1 * (d.mean / p_ge1))


def c_C(d: OffspringDistribution) -> float:
    """Smallest c with E[Y(Y-1)(Y-2)] <= c E[Y(Y-1)] (1 + E[Y])."""
    m, f2, f3 = d.factorial_moments()
    if f3 <= 0:
        return 0.0
    return f3 / (f2 * (1 + m))


def c_B(d: OffspringDistribution, eps: float) -> float:
    """Smallest c with E[Y^2; Y > c(1 + E[Y])] <= eps E[Y^2; Y>=2]; inf past the cap.

    The left side only depends on floor(c (1 + E[Y])), so the minimum is
    y0 / (1 + E[Y]) for the least integer y0 that satisfies the inequality.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    _, e2, _ = d.restricted_moments()
    if e2 <= 0:
        # no mass at 2 or above: the condition is vacuous
        return 0.0
    target = eps * e2
    scale = 1 + d.mean

    def ok(y0: int) -> bool:
        return d.tail_second_moment(y0) <= target

    if ok(0):
        return 0.0
    lo, hi = 0, 1
    cap = int(CB_CAP * scale)
    while not ok(hi):
        lo = hi
        hi *= 2
        if hi > cap:
            if not ok(cap):
                return math.inf
            hi = cap
            break
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi / scale


# --------------------------------------------------------------------------
# environment-level reports

@dataclass(frozen=True)
class ConditionSlice:
    """Per-generation constants for k = 1..horizon and their supremum."""

    name: str
    values: np.ndarray
    sup: float
    argsup: int  # generation attaining the supremum

    def validates(self, c: float) -> bool:
        return self.sup <= c


def _slice(name: str, values) -> ConditionSlice:
    values = np.asarray(values, dtype=float)
    i = int(np.argmax(values))
    return ConditionSlice(name, values, float(values[i]), i + 1)


def check_A(env: Environment, horizon: int) -> ConditionSlice:
    return _slice("A", [c_A(d) for d in env.laws(horizon)])


def check_B(env: Environment, eps: float, horizon: int) -> ConditionSlice:
    return _slice(f"B(eps={eps:g})", [c_B(d, eps) for d in env.laws(horizon)])


def check_C(env: Environment, horizon: int) -> ConditionSlice:
    return _slice("C", [c_C(d) for d in env.laws(horizon)])


def dominance_constants(c_bar: float, eps: float) -> tuple[float, float]:
    """Constants for (B) and (A) implied by (C): (max(3, 5 c/eps), max(12, 40 c))."""
    if c_bar < 0 or not 0 < eps < 1:
        raise ValueError("need c_bar >= 0 and 0 < eps < 1")
    return max(3.0, 5.0 * c_bar / eps), max(12.0, 40.0 * c_bar)


@dataclass(frozen=True)
class ConditionReport:
    horizon: int
    eps: float
    A: ConditionSlice
    B: ConditionSlice
    C: ConditionSlice
    B_half: ConditionSlice
    gamma: float
    prop_c_eps: float
    prop_c_A: float

    @property
    def dominance_B_ok(self) -> bool:
        return self.B.sup <= self.prop_c_eps

    @property
    def dominance_A_ok(self) -> bool:
        return self.A.sup <= self.prop_c_A

    @property
    def b_implies_a_ok(self) -> bool:
        """sup cA <= 4 sup cB(1/2)."""
        return self.A.sup <= 4 * self.B_half.sup * (1 + 1e-12)


def condition_report(env: Environment, horizon: int, eps: float = 0.5) -> ConditionReport:
    A = check_A(env, horizon)
    C = check_C(env, horizon)
    B = check_B(env, eps, horizon)
    B_half = B if eps == 0.5 else check_B(env, 0.5, horizon)
    c_eps, c_a = dominance_constants(C.sup, eps)
    return ConditionReport(horizon, eps, A, B, C, B_half, max(1.0, 4 * A.sup), c_eps, c_a)


# --------------------------------------------------------------------------
# finite-horizon proxies

@dataclass(frozen=True)
class ClassifyTolerances:
    big: float = 1e6
    small: float = 1e-6
    ratio: float = 0.01
    tail: float = 1e-6
    stable: float = 1e-6
    bounded_factor: float = 10.0
    window: float = 0.1


def _window_start(n: int, frac: float) -> int:
    return max(0, n - max(1, math.ceil(frac * n)))


def relative_increment(log_series: np.ndarray, frac: float = 0.1) -> float:
    """Average per-generation increment over the last window, relative to the final value.

    ``log_series`` holds logarithms of a non-decreasing partial-sum sequence.
    """
    n = len(log_series) - 1
    if n < 1 or log_series[n] == -math.inf:
        return 0.0
    start = _window_start(n, frac)
    frac_gain = -math.expm1(log_series[start] - log_series[n]) if log_series[start] > -math.inf else 1.0
    return frac_gain / (n - start)


def linear_relative_increment(series: np.ndarray, frac: float = 0.1) -> float:
    with np.errstate(divide="ignore"):
        return relative_increment(np.log(np.asarray(series, dtype=float)), frac)


@dataclass(frozen=True)
class DivergencePanel:
    """Extinction-criteria statistics at n = 0..horizon."""

    horizon: int
    second_moment_ratio: np.ndarray  # E[Z_n]^2 / E[Z_n^2] = 1/(S_rho + 1)
    S_rho: np.ndarray
    mu: np.ndarray
    log_mu: np.ndarray
    S_nu: np.ndarray
    J: np.ndarray
    inv_mu_sum: np.ndarray  # sum_{k<=n} 1/mu_{k-1}
    S_rho_diverging: bool
    S_nu_diverging: bool
    J_diverging: bool
    inv_mu_sum_diverging: bool
    increments: dict

    @property
    def jirina_extinction(self) -> bool:
        """Sum phi_k(0)/mu_{k-1} looks divergent, which suffices for q = 1."""
        return self.J_diverging

    def summary(self) -> dict:
        n = self.horizon
        return {
            "horizon": n,
            "second_moment_ratio": float(self.second_moment_ratio[n]),
            "S_rho": float(self.S_rho[n]),
            "mu": float(self.mu[n]),
            "log_mu": float(self.log_mu[n]),
            "S_nu": float(self.S_nu[n]),
            "J": float(self.J[n]),
            "inv_mu_sum": float(self.inv_mu_sum[n]),
            "S_rho_diverging": self.S_rho_diverging,
            "S_nu_diverging": self.S_nu_diverging,
            "J_diverging": self.J_diverging,
            "inv_mu_sum_diverging": self.inv_mu_sum_diverging,
            "jirina_extinction": self.jirina_extinction,
            "increments": dict(self.increments),
        }


def _exp(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.exp(x)


def divergence_panel(env: Environment, horizon: int, tol: ClassifyTolerances | None = None) -> DivergencePanel:
    tol = tol or ClassifyTolerances()
    tab = env.moment_table(horizon)
    inc = {
        "S_rho": relative_increment(tab.log_S_rho, tol.window),
        "S_nu": relative_increment(tab.log_S_nu, tol.window),
        "J": relative_increment(tab.log_J, tol.window),
        "inv_mu_sum": relative_increment(tab.log_inv_mu_sum, tol.window),
    }
    return DivergencePanel(
        horizon=horizon,
        second_moment_ratio=np.exp(-np.logaddexp(tab.log_S_rho, 0.0)),
        S_rho=tab.S_rho,
        mu=tab.mu,
        log_mu=tab.log_mu,
        S_nu=tab.S_nu,
        J=tab.J,
        inv_mu_sum=_exp(tab.log_inv_mu_sum),
        S_rho_diverging=inc["S_rho"] >= tol.tail,
        S_nu_diverging=inc["S_nu"] >= tol.tail,
        J_diverging=inc["J"] >= tol.tail,
        inv_mu_sum_diverging=inc["inv_mu_sum"] >= tol.tail,
        increments=inc,
    )


class Verdict(str, enum.Enum):
    SUPERCRITICAL = "supercritical"
    ASYMPTOTICALLY_DEGENERATE = "asymptotically_degenerate"
    CRITICAL = "critical"
    SUBCRITICAL = "subcritical"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    horizon: int
    diagnostics: dict

    @property
    def determined(self) -> bool:
        return self.verdict is not Verdict.UNDETERMINED


def classify(env: Environment, horizon: int, tol: ClassifyTolerances | None = None) -> Classification:
    """Four-way criticality verdict from windowed proxies at ``horizon``."""
    tol = tol or ClassifyTolerances()
    tab = env.moment_table(horizon)
    n = horizon
    start = _window_start(n, tol.window)
    log_mu = tab.log_mu
    mu_n = math.exp(log_mu[n]) if log_mu[n] < 709 else math.inf
    win = log_mu[start: n + 1]
    mu_stable = float(win.max() - win.min()) < math.log1p(tol.stable)
    s_nu_inc = relative_increment(tab.log_S_nu, tol.window)
    s_nu_converged = s_nu_inc < tol.tail
    # r_n = (1/mu_n) / S_nu(n)
    log_r = -log_mu[n] - tab.log_S_nu[n]
    r_n = math.exp(log_r) if log_r < 709 else math.inf
    # mu_n S_nu(n) over the window
    log_prod = log_mu[start: n + 1] + tab.log_S_nu[start: n + 1]
    prod_bounded = bool(np.all(np.isfinite(log_prod))) and \
        float(np.max(log_prod)) <= math.log(tol.bounded_factor) + float(np.median(log_prod))
    with np.errstate(over="ignore"):
        prod = np.exp(log_prod)
    lindvall = lindvall_diagnostic(env, horizon, tol)

    checks = {
        "supercritical": mu_n > tol.big and s_nu_converged,
        "asymptotically_degenerate": mu_stable and tol.small <= mu_n <= tol.big and s_nu_converged,
        "critical": (not s_nu_converged) and r_n < tol.ratio,
        "subcritical": mu_n < tol.small and prod_bounded,
    }
    verdict = Verdict.UNDETERMINED
    for name, passed in checks.items():
        if passed:
            verdict = Verdict(name)
            break
    diagnostics = {
        "mu": mu_n,
        "log_mu": float(log_mu[n]),
        "mu_window_log_range": float(win.max() - win.min()),
        "mu_stable": mu_stable,
        "mu_trend": _trend(win),
        "S_nu": float(tab.S_nu[n]),
        "log_S_nu": float(tab.log_S_nu[n]),
        "S_nu_relative_increment": s_nu_inc,
        "S_nu_converged": s_nu_converged,
        "r_n": r_n,
        "mu_S_nu_window_max": float(np.max(prod)),
        "mu_S_nu_window_median": float(np.median(prod)),
        "mu_S_nu_bounded": prod_bounded,
        "lindvall_L": lindvall[0],
        "lindvall_converged": lindvall[1],
        "checks": checks,
        "panel": divergence_panel(env, horizon, tol).summary(),
        "tolerances": asdict(tol),
    }
    return Classification(verdict, horizon, diagnostics)


def _trend(log_window: np.ndarray) -> str:
    d = float(log_window[-1] - log_window[0])
    if abs(d) < 1e-12:
        return "flat"
    return "increasing" if d > 0 else "decreasing"


def lindvall_diagnostic(env: Environment, horizon: int,
                        tol: ClassifyTolerances | None = None) -> tuple[float, bool]:
    """(L(horizon), converged) for L(n) = sum_{k<=n} (1 - f_k[1]).

    A converged sum means the process can freeze at a positive state with
    positive probability.
    """
    tol = tol or ClassifyTolerances()
    L = env.moment_table(horizon).L
    return float(L[horizon]), linear_relative_increment(L, tol.window) < tol.tail
