"""Reproducible simulation of a process in varying environment.

Paths are grouped into fixed-size blocks.  Block ``b`` draws from its own
Philox stream keyed by a 64-bit mix of (seed, b), so the outcome depends on
the seed and the block size only and never on how blocks are scheduled.
Within a block the living paths are advanced together, one generation at a
time.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .environment import Environment
from .ks import ks_exponential_sample

INT64_MAX = np.iinfo(np.int64).max
_MASK64 = (1 << 64) - 1


class NoSurvivorsError(RuntimeError):
    """Every simulated path died before the requested generation."""


def mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def block_rng(seed: int, block: int) -> np.random.Generator:
    k0 = mix64(seed & _MASK64)
    k1 = mix64(k0 ^ mix64(block))
    return np.random.Generator(np.random.Philox(key=np.array([k0, k1], dtype=np.uint64)))


@dataclass(frozen=True)
class SimConfig:
    paths: int
    horizon: int
    seed: int = 0
    checkpoints: tuple[int, ...] = ()  # generations whose Z values are kept
    frozen_from: int | None = None     # count paths constant and positive from here on
    shortcut: bool = False             # use family convolution identities
    workers: int = 1
    block_size: int = 1 << 16

    def __post_init__(self):
        if self.paths < 1 or self.horizon < 1:
            raise ValueError("paths and horizon must be >= 1")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be >= 1")
        if any(not 1 <= c <= self.horizon for c in self.checkpoints):
            raise ValueError("checkpoints must lie in 1..horizon")
        if self.frozen_from is not None and not 0 <= self.frozen_from <= self.horizon:
            raise ValueError("frozen_from must lie in 0..horizon")

    @property
    def recorded(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.checkpoints) | {self.horizon}))


@dataclass
class SimOutcome:
    """Merged statistics of a simulation run.

    ``alive[n]`` counts paths with Z_n > 0 (overflowed paths included) and
    ``survivors[g]`` holds the sorted positive values of Z_g at every
    recorded generation, overflowed paths excluded.
    """

    config: SimConfig
    alive: np.ndarray
    overflow: int
    survivors: dict[int, np.ndarray]
    frozen: int | None = None

    @property
    def paths(self) -> int:
        return self.config.paths

    @property
    def horizon(self) -> int:
        return self.config.horizon

    @property
    def survival(self) -> np.ndarray:
        """p_hat[n] for n = 0..horizon."""
        return self.alive / self.paths

    @property
    def survival_se(self) -> np.ndarray:
        p = self.survival
        return np.sqrt(p * (1 - p) / self.paths)

    @property
    def q_hat(self) -> float:
        """Fraction of paths extinct by the horizon."""
        return 1.0 - float(self.survival[-1])

    @property
    def frozen_fraction(self) -> float | None:
        return None if self.frozen is None else self.frozen / self.paths

    def histogram(self, generation: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Distinct positive values of Z_generation and their counts."""
        g = self.horizon if generation is None else generation
        return np.unique(self.survivors[g], return_counts=True)

    def to_dict(self) -> dict:
        hist = {}
        for g in sorted(self.survivors):
            v, c = self.histogram(g)
            hist[str(g)] = {"values": v.tolist(), "counts": c.tolist()}
        p, se = self.survival, self.survival_se
        return {
            "paths": self.paths,
            "horizon": self.horizon,
            "seed": self.config.seed,
            "block_size": self.config.block_size,
            "shortcut": self.config.shortcut,
            "alive": self.alive.tolist(),
            "survival": p.tolist(),
            "survival_se": se.tolist(),
            "q_hat": self.q_hat,
            "overflow": self.overflow,
            "frozen_from": self.config.frozen_from,
            "frozen": self.frozen,
            "histograms": hist,
        }


@dataclass
class _Partial:
    alive: np.ndarray
    overflow: int
    survivors: dict
    frozen: int


def _run_block(laws, cfg: SimConfig, block: int, n_paths: int) -> _Partial:
    rng = block_rng(cfg.seed, block)
    recorded = set(cfg.recorded)
    alive = np.zeros(cfg.horizon + 1, dtype=np.int64)
    alive[0] = n_paths
    z = np.ones(n_paths, dtype=np.int64)
    overflow = 0
    survivors = {}
    track = cfg.frozen_from is not None
    anchor = z.copy() if track and cfg.frozen_from == 0 else None
    steady = np.ones(n_paths, dtype=bool)
    for n in range(1, cfg.horizon + 1):
        d, limit = laws[n - 1]
        big = z > limit
        if big.any():
            # the next generation could exceed the int64 range
            overflow += int(big.sum())
            keep = ~big
            z, steady = z[keep], steady[keep]
            if anchor is not None:
                anchor = anchor[keep]
        z = d.sample_sums(z, rng, shortcut=cfg.shortcut)
        keep = z > 0
        if not keep.all():
            z, steady = z[keep], steady[keep]
            if anchor is not None:
                anchor = anchor[keep]
        if track:
            if n == cfg.frozen_from:
                anchor = z.copy()
            elif anchor is not None:
                steady &= z == anchor
        alive[n] = len(z) + overflow
        if n in recorded:
            survivors[n] = z.copy()
    frozen = int(steady.sum()) if track else 0
    return _Partial(alive, overflow, survivors, frozen)


def _overflow_limit(d) -> int:
    """Largest Z whose offspring total is guaranteed to fit in int64."""
    bound = d.max_value if d.max_value is not None else d.support_bound()
    return INT64_MAX // max(int(bound), 1)


def simulate(env: Environment, cfg: SimConfig) -> SimOutcome:
    laws = [(d, _overflow_limit(d)) for d in env.laws(cfg.horizon)]
    blocks = [(b, min(cfg.block_size, cfg.paths - b * cfg.block_size))
              for b in range(math.ceil(cfg.paths / cfg.block_size))]
    if cfg.workers == 1:
        parts = [_run_block(laws, cfg, b, m) for b, m in blocks]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda bm: _run_block(laws, cfg, *bm), blocks))
    alive = np.sum([p.alive for p in parts], axis=0)
    survivors = {g: np.sort(np.concatenate([p.survivors[g] for p in parts])) for g in cfg.recorded}
    return SimOutcome(
        config=cfg,
        alive=alive,
        overflow=sum(p.overflow for p in parts),
        survivors=survivors,
        frozen=sum(p.frozen for p in parts) if cfg.frozen_from is not None else None,
    )


@dataclass(frozen=True)
class WMoments:
    """Empirical moments of W_n = Z_n / mu_n over non-overflowed paths."""

    n: int
    mean_w: float
    mean_se: float
    second_w: float
    second_se: float
    p_w0: float
    p_w0_se: float
    delta: float
    p_w_small: float   # P(W_n < delta), the finite-horizon stand-in for P(W = 0)
    p_w_small_se: float
    count: int

    def as_tuple(self) -> tuple[float, float, float]:
        return self.mean_w, self.second_w, self.p_w0


def estimate_w_moments(outcome: SimOutcome, env: Environment, n: int | None = None,
                       delta: float = 1e-3) -> WMoments:
    n = outcome.horizon if n is None else n
    if n not in outcome.survivors:
        raise ValueError(f"generation {n} was not recorded")
    mu = math.exp(env.moment_table(n).log_mu[n])
    count = outcome.paths - outcome.overflow
    w = outcome.survivors[n] / mu
    zeros = count - len(w)

    def mean_se(x_pos: np.ndarray) -> tuple[float, float]:
        # x is zero on the dead paths
        m = float(np.sum(x_pos)) / count
        var = float(np.sum(x_pos * x_pos)) / count - m * m
        return m, math.sqrt(max(var, 0.0) / count)

    def prop(k: int) -> tuple[float, float]:
        p = k / count
        return p, math.sqrt(p * (1 - p) / count)

    m1, se1 = mean_se(w)
    m2, se2 = mean_se(w * w)
    p0, se0 = prop(zeros)
    ps, ses = prop(zeros + int(np.sum(w < delta)))
    return WMoments(n, m1, se1, m2, se2, p0, se0, delta, ps, ses, count)


def yaglom_ks(outcome: SimOutcome, a_n: float, n: int | None = None) -> float:
    """KS distance between Z_n / a_n on surviving paths and Exp(1)."""
    n = outcome.horizon if n is None else n
    z = outcome.survivors[n]
    if len(z) == 0:
        raise NoSurvivorsError(f"no path survived to generation {n}")
    return ks_exponential_sample(z / a_n)


def survival_zscores(outcome: SimOutcome, exact: np.ndarray) -> np.ndarray:
    """(p_hat_n - p_n) / se_n for n = 1..len(exact), with se from the exact p_n."""
    exact = np.asarray(exact, dtype=float)
    p_hat = outcome.survival[1: len(exact) + 1]
    se = np.sqrt(exact * (1 - exact) / outcome.paths)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (p_hat - exact) / se
    return np.where(se > 0, z, np.where(p_hat == exact, 0.0, np.inf))
