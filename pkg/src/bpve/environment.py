"""Varying environments and their moment tables.

An environment is the sequence of offspring laws ``f_1, f_2, ...``.  It is
built either directly from Python (a list, a constant law, any callable
``k -> law``) or from a JSON document::

    {"mode": "rule", "entries": [{"family": "symmetric", "p": "1/(k^2)"}]}

``mode`` is ``explicit`` (entry k is f_k), ``cycle`` (entries repeat
periodically) or ``rule`` (a single entry evaluated at every k).  All
parameter fields are expressions in ``k``.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .expression import Expression, ExpressionError, parse_expression
from .offspring import (
    Binary, Binomial, DistributionError, FiniteSupport, Hypergeometric,
    LinearFractional, NegativeBinomial, OffspringDistribution, Poisson, Symmetric,
)

# linear mu_n is trusted only inside this range; outside, use log_mu
MU_RANGE = (1e-300, 1e300)
# internal tolerance on E[W_n^2] = 1 + S_rho(n) = S_nu(n) + 1/mu_n
EQUIV_TOL = 1e-9

MODES = ("explicit", "cycle", "rule")

# family -> (parameter names, which ones must be integers)
FAMILY_PARAMS: dict[str, tuple[tuple[str, ...], frozenset]] = {
    "poisson": (("lambda",), frozenset()),
    "binomial": (("m", "p"), frozenset({"m"})),
    "linear_fractional": (("p", "s1"), frozenset()),
    "negative_binomial": (("alpha", "p"), frozenset({"alpha"})),
    "hypergeometric": (("N", "K", "m"), frozenset({"N", "K", "m"})),
    "binary": (("p",), frozenset()),
    "symmetric": (("p",), frozenset()),
    "finite": (("atoms",), frozenset()),
}


class SpecError(ValueError):
    """Malformed environment document.  ``line``/``column`` are 1-based."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(message + where)
        self.message = message
        self.line = line
        self.column = column


class NeumaierSum:
    """Running compensated sum."""

    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x: float):
        if not math.isfinite(x) or not math.isfinite(self.total):
            self.total, self.comp = self.total + x, 0.0
            return
        t = self.total + x
        if abs(self.total) >= abs(x):
            self.comp += (self.total - t) + x
        else:
            self.comp += (x - t) + self.total
        self.total = t

    @property
    def value(self) -> float:
        return self.total + self.comp


# --------------------------------------------------------------------------
# specification documents

@dataclass(frozen=True)
class EntrySpec:
    family: str
    params: dict  # name -> Expression, or for 'finite' a tuple of (Expression, Expression)


@dataclass(frozen=True)
class EnvironmentSpec:
    mode: str
    entries: tuple[EntrySpec, ...]
    horizon: int | None = None
    source: str | None = None


def _locate(text: str, needle: str) -> tuple[int, int] | None:
    idx = text.find(needle)
    if idx < 0:
        return None
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return line, col


def _expr(text: str, raw, what: str) -> Expression:
    try:
        return parse_expression(raw)
    except ExpressionError as exc:
        where = _locate(text, json.dumps(raw)) if isinstance(raw, str) else None
        if where is None:
            raise SpecError(f"{what}: {exc.message}") from None
        # +1 skips the opening quote of the JSON string
        raise SpecError(f"{what}: {exc.message}", where[0], where[1] + exc.column) from None


def parse_spec(text: str) -> EnvironmentSpec:
    """Parse an environment document (JSON text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SpecError("document must be a JSON object", 1, 1)
    unknown = set(doc) - {"mode", "entries", "horizon"}
    if unknown:
        raise SpecError(f"unknown top-level field(s): {sorted(unknown)}")
    mode = doc.get("mode")
    if mode not in MODES:
        raise SpecError(f"mode must be one of {MODES}, got {mode!r}")
    entries = doc.get("entries")
    if not isinstance(entries, list) or not entries:
        raise SpecError("entries must be a non-empty list")
    if mode == "rule" and len(entries) != 1:
        raise SpecError("rule mode takes exactly one entry")
    horizon = doc.get("horizon")
    if horizon is not None and (not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1):
        raise SpecError(f"horizon must be a positive integer, got {horizon!r}")

    parsed = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict) or "family" not in entry:
            raise SpecError(f"entry {i}: must be an object with a 'family' field")
        family = entry["family"]
        if family not in FAMILY_PARAMS:
            raise SpecError(f"entry {i}: unknown family {family!r}")
        names, _ = FAMILY_PARAMS[family]
        given = set(entry) - {"family"}
        if given != set(names):
            raise SpecError(
                f"entry {i}: family {family!r} takes parameters {list(names)}, got {sorted(given)}"
            )
        if family == "finite":
            atoms = entry["atoms"]
            if not isinstance(atoms, list) or not atoms:
                raise SpecError(f"entry {i}: atoms must be a non-empty list")
            pairs = []
            for j, atom in enumerate(atoms):
                if not isinstance(atom, list) or len(atom) != 2:
                    raise SpecError(f"entry {i}: atom {j} must be [value, probability]")
                pairs.append((
                    _expr(text, atom[0], f"entry {i} atom {j} value"),
                    _expr(text, atom[1], f"entry {i} atom {j} probability"),
                ))
            params = {"atoms": tuple(pairs)}
        else:
            params = {n: _expr(text, entry[n], f"entry {i} parameter {n!r}") for n in names}
        parsed.append(EntrySpec(family, params))
    return EnvironmentSpec(mode, tuple(parsed), horizon, text)


def _integer(name: str, x: float, k: int) -> int:
    r = round(x)
    if not math.isfinite(x) or abs(x - r) > 1e-9:
        raise SpecError(f"parameter {name!r} = {x!r} at k={k} is not an integer")
    return int(r)


def build_distribution(entry: EntrySpec, k: int) -> OffspringDistribution:
    """Evaluate one entry's parameter expressions at generation ``k``."""
    _, ints = FAMILY_PARAMS[entry.family]
    try:
        if entry.family == "finite":
            atoms = [(_integer("value", v(k), k), p(k)) for v, p in entry.params["atoms"]]
            return FiniteSupport(atoms)
        vals = {}
        for name, ex in entry.params.items():
            x = ex(k)
            vals[name] = _integer(name, x, k) if name in ints else x
        f = entry.family
        if f == "poisson":
            return Poisson(vals["lambda"])
        if f == "binomial":
            return Binomial(vals["m"], vals["p"])
        if f == "linear_fractional":
            return LinearFractional(vals["p"], vals["s1"])
        if f == "negative_binomial":
            return NegativeBinomial(vals["alpha"], vals["p"])
        if f == "hypergeometric":
            return Hypergeometric(vals["N"], vals["K"], vals["m"])
        if f == "binary":
            return Binary(vals["p"])
        return Symmetric(vals["p"])
    except (DistributionError, ArithmeticError) as exc:
        raise SpecError(f"generation k={k}: {exc}") from None


def realize(spec: EnvironmentSpec, k: int) -> OffspringDistribution:
    """The offspring law of generation ``k`` (k >= 1) under ``spec``."""
    if k < 1:
        raise ValueError("generations are numbered from 1")
    entries = spec.entries
    if spec.mode == "explicit":
        if k > len(entries):
            raise SpecError(f"explicit environment defines {len(entries)} generations, asked for k={k}")
        entry = entries[k - 1]
    elif spec.mode == "cycle":
        entry = entries[(k - 1) % len(entries)]
    else:
        entry = entries[0]
    return build_distribution(entry, k)


# --------------------------------------------------------------------------
# moment tables

@dataclass(frozen=True)
class MomentTable:
    """Rows n = 0..N of the environment's moment data.

    ``mu`` is the running product of means; once it leaves ``MU_RANGE`` it is
    no longer trusted (``log_space`` is set) and ``log_mu`` should be used.
    The partial sums are kept both linearly (compensated; may overflow to
    inf) and as logarithms.
    """

    mu: np.ndarray
    log_mu: np.ndarray
    nu: np.ndarray
    rho: np.ndarray
    S_nu: np.ndarray
    S_rho: np.ndarray
    J: np.ndarray
    L: np.ndarray
    log_S_nu: np.ndarray
    log_S_rho: np.ndarray
    log_J: np.ndarray
    log_inv_mu_sum: np.ndarray  # log of sum_{k<=n} 1/mu_{k-1}

    @property
    def n(self) -> int:
        return len(self.mu) - 1

    @property
    def log_space(self) -> bool:
        lo, hi = MU_RANGE
        return bool(np.any((self.mu < lo) | (self.mu > hi)))

    def row(self, n: int) -> dict:
        return {name: float(getattr(self, name)[n]) for name in ROW_FIELDS}

    def equiv_residual(self) -> np.ndarray:
        """|(1 + S_rho) - (S_nu + 1/mu)| / (1 + S_rho), computed in log space."""
        lhs = np.logaddexp(self.log_S_rho, 0.0)
        rhs = np.logaddexp(self.log_S_nu, -self.log_mu)
        return np.abs(np.expm1(lhs - rhs))


ROW_FIELDS = ("mu", "log_mu", "nu", "rho", "S_nu", "S_rho", "J", "L")


class _TableBuilder:
    """Incremental state behind ``Environment.moment_table``."""

    def __init__(self):
        self.cols: dict[str, list[float]] = {
            "mu": [1.0], "log_mu": [0.0], "nu": [0.0], "rho": [0.0],
            "S_nu": [0.0], "S_rho": [0.0], "J": [0.0], "L": [0.0],
            "log_S_nu": [-math.inf], "log_S_rho": [-math.inf], "log_J": [-math.inf],
            "log_inv_mu_sum": [-math.inf],
        }
        self.sums = {name: NeumaierSum() for name in ("S_nu", "S_rho", "J", "L")}

    @property
    def n(self) -> int:
        return len(self.cols["mu"]) - 1

    def extend(self, d: OffspringDistribution):
        c = self.cols
        log_prev = c["log_mu"][-1]
        m = d.mean
        nu, rho = d.nu, d.rho
        phi0 = 0.0 if not d.has_mass_above_one else 1.0 / (1.0 - d.p0) - 1.0 / m
        c["nu"].append(nu)
        c["rho"].append(rho)
        c["mu"].append(c["mu"][-1] * m)
        c["log_mu"].append(log_prev + math.log(m))
        inv_prev = math.exp(-log_prev) if -log_prev < 709 else math.inf
        for name, num in (("S_nu", nu), ("S_rho", rho), ("J", phi0)):
            self.sums[name].add(num * inv_prev if num else 0.0)
            c[name].append(self.sums[name].value)
            lt = math.log(num) - log_prev if num > 0 else -math.inf
            c["log_" + name].append(float(np.logaddexp(c["log_" + name][-1], lt)))
        self.sums["L"].add(1.0 - d.p1)
        c["L"].append(self.sums["L"].value)
        c["log_inv_mu_sum"].append(float(np.logaddexp(c["log_inv_mu_sum"][-1], -log_prev)))
        # E[W_n^2] computed both ways must agree
        lhs = float(np.logaddexp(c["log_S_rho"][-1], 0.0))
        rhs = float(np.logaddexp(c["log_S_nu"][-1], -c["log_mu"][-1]))
        if abs(math.expm1(lhs - rhs)) > EQUIV_TOL:
            raise ArithmeticError(
                f"moment identity violated at n={self.n}: residual {math.expm1(lhs - rhs):.3g}"
            )

    def table(self, n: int) -> MomentTable:
        return MomentTable(**{k: np.array(v[: n + 1]) for k, v in self.cols.items()})


class Environment:
    """Sequence of offspring laws indexed by generation k = 1, 2, ...

    Realised laws are cached, so the same ``k`` always yields the same
    object.  ``horizon`` (optional) is the number of generations defined.
    """

    def __init__(self, generator: Callable[[int], OffspringDistribution],
                 horizon: int | None = None, spec: EnvironmentSpec | None = None,
                 name: str | None = None):
        self._generator = generator
        self.horizon = horizon
        self.spec = spec
        self.name = name
        self._cache: dict[int, OffspringDistribution] = {}
        self._table = _TableBuilder()
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, d: OffspringDistribution, name: str | None = None) -> "Environment":
        return cls(lambda k: d, name=name or f"constant {d!r}")

    @classmethod
    def from_list(cls, laws: Sequence[OffspringDistribution], cycle: bool = False,
                  name: str | None = None) -> "Environment":
        laws = list(laws)
        if not laws:
            raise ValueError("need at least one law")
        if cycle:
            return cls(lambda k: laws[(k - 1) % len(laws)], name=name)

        def gen(k):
            if k > len(laws):
                raise IndexError(f"environment defines {len(laws)} generations, asked for k={k}")
            return laws[k - 1]

        return cls(gen, horizon=len(laws), name=name)

    @classmethod
    def from_spec(cls, spec: EnvironmentSpec | str) -> "Environment":
        if isinstance(spec, str):
            spec = parse_spec(spec)
        horizon = spec.horizon
        if horizon is None and spec.mode == "explicit":
            horizon = len(spec.entries)
        return cls(lambda k: realize(spec, k), horizon=horizon, spec=spec)

    def realize(self, k: int) -> OffspringDistribution:
        if k < 1:
            raise ValueError("generations are numbered from 1")
        d = self._cache.get(k)
        if d is None:
            d = self._generator(k)
            if not isinstance(d, OffspringDistribution):
                raise TypeError(f"generator returned {type(d).__name__} for k={k}")
            d = self._cache.setdefault(k, d)
        return d

    __getitem__ = realize

    def laws(self, n: int) -> list[OffspringDistribution]:
        """[f_1, ..., f_n]."""
        return [self.realize(k) for k in range(1, n + 1)]

    def moment_table(self, n: int) -> MomentTable:
        """Moment rows 0..n; extends the cached table as needed."""
        if n < 0:
            raise ValueError("n must be non-negative")
        with self._lock:
            while self._table.n < n:
                self._table.extend(self.realize(self._table.n + 1))
            return self._table.table(n)

    def __repr__(self):
        return f"Environment({self.name or 'custom'})"


def load_environment(path) -> Environment:
    with open(path, encoding="utf-8") as fh:
        return Environment.from_spec(parse_spec(fh.read()))


def moment_table(env: Environment, n: int) -> MomentTable:
    return env.moment_table(n)
