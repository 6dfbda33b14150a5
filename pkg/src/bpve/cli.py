"""Command-line front end emitting canonical JSON reports and CSV plot data.

Exit codes: 0 ok, 2 spec error, 3 undetermined classification,
4 no survivors in a Monte Carlo run, 5 quantity undefined for the regime.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .conditions import ClassifyTolerances, Verdict, classify, condition_report, divergence_panel
from .environment import Environment, SpecError, parse_spec
from .exact import (RegimeError, compose_pmf, representation_check, survival, survival_curve,
                    yaglom_law, yaglom_scale)
from .montecarlo import NoSurvivorsError, SimConfig, simulate, yaglom_ks
from .shape import shape_certificate, phi, phi_prime_bounds

EXIT_OK, EXIT_SPEC, EXIT_UNDETERMINED, EXIT_NO_SURVIVORS, EXIT_REGIME = 0, 2, 3, 4, 5


# --------------------------------------------------------------------------
# canonical serialization

def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".12g")


def canonical_json(obj) -> str:
    """Sorted keys, no whitespace, floats as %.12g, non-finite floats as strings."""
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_json(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if hasattr(obj, "value"):  # enums
        return canonical_json(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def build_report(command: str, spec_bytes: bytes, params: dict, result: dict, timing: dict) -> dict:
    report = {
        "tool": "bpve",
        "version": __version__,
        "command": command,
        "spec_digest": digest(spec_bytes),
        "parameters": params,
        "result": result,
    }
    report["report_digest"] = digest(canonical_json(report).encode())
    report["timing"] = timing
    return report


def write_csv(path: str, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt_float(float(x)).strip('"') if isinstance(x, (float, np.floating)) else x
                    for x in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


# --------------------------------------------------------------------------
# commands; each returns (params, result, csv header, csv rows, exit code)

def cmd_moments(env: Environment, args):
    tab = env.moment_table(args.n)
    cols = ("mu", "nu", "rho", "S_nu", "S_rho", "J", "L")
    rows = [(n, *(float(getattr(tab, c)[n]) for c in cols)) for n in range(1, args.n + 1)]
    res = tab.equiv_residual()
    result = {
        "final": {c: float(getattr(tab, c)[args.n]) for c in cols} | {"log_mu": float(tab.log_mu[args.n])},
        "log_space": tab.log_space,
        "equiv_max_residual": float(np.max(res[1:])) if args.n >= 1 else 0.0,
    }
    return {"n": args.n}, result, ("n",) + cols, rows, EXIT_OK


def cmd_survival(env: Environment, args):
    curve = survival_curve(env, args.n)
    resid = [representation_check(env, n).residual for n in range(1, args.n + 1)]
    rows = [(n, float(curve[n - 1]), float(resid[n - 1])) for n in range(1, args.n + 1)]
    result = {
        "survival": float(curve[-1]),
        "max_representation_residual": float(max(resid)),
        "monotone": bool(np.all(np.diff(curve) <= 0)),
    }
    if args.pmf:
        law = compose_pmf(env, args.n, args.pmf)
        result["pmf"] = law.pmf
        result["remainder"] = law.remainder
    return {"n": args.n, "pmf": args.pmf}, result, ("n", "survival", "representation_residual"), rows, EXIT_OK


def cmd_classify(env: Environment, args):
    tol = ClassifyTolerances(big=args.big, small=args.small, ratio=args.ratio, tail=args.tail,
                             stable=args.stable, bounded_factor=args.bounded_factor, window=args.window)
    c = classify(env, args.horizon, tol)
    result = {"verdict": c.verdict.value, "diagnostics": c.diagnostics}
    code = EXIT_UNDETERMINED if c.verdict is Verdict.UNDETERMINED else EXIT_OK
    panel = divergence_panel(env, args.horizon, tol)
    rows = [(n, float(panel.second_moment_ratio[n]), float(panel.S_rho[n]), float(panel.mu[n]),
             float(panel.S_nu[n]), float(panel.J[n]), float(panel.inv_mu_sum[n]))
            for n in range(1, args.horizon + 1)]
    header = ("n", "second_moment_ratio", "S_rho", "mu", "S_nu", "J", "inv_mu_sum")
    return {"horizon": args.horizon, "tolerances": tol.__dict__}, result, header, rows, code


def cmd_yaglom(env: Environment, args):
    a_n = yaglom_scale(env, args.n)
    if not (a_n > 0 and math.isfinite(a_n)):
        raise RegimeError(f"a_n = {a_n!r}: not in the critical regime")
    tab = env.moment_table(args.n)
    params = {"n": args.n}
    header = ("x", "empirical", "exponential")
    if args.mc:
        params.update(paths=args.mc, seed=args.seed, shortcut=not args.no_shortcut,
                      block_size=args.block_size)
        cfg = SimConfig(paths=args.mc, horizon=args.n, seed=args.seed, shortcut=not args.no_shortcut,
                        workers=args.workers, block_size=args.block_size)
        out = simulate(env, cfg)
        ks = yaglom_ks(out, a_n)
        values, counts = out.histogram()
        x = values / a_n
        emp = np.cumsum(counts) / counts.sum()
        p_hat, se = float(out.survival[-1]), float(out.survival_se[-1])
        exact, _ = survival(env, args.n)
        exact_se = math.sqrt(exact * (1 - exact) / args.mc)
        result = {
            "route": "monte_carlo",
            "a_n": a_n,
            "ks": ks,
            "survival": p_hat,
            "survival_se": se,
            "exact_survival": exact,
            "survival_zscore": (p_hat - exact) / exact_se if exact_se > 0 else 0.0,
            "kolmogorov_ratio": p_hat * float(tab.S_nu[args.n]) / 2,
            "survivors": int(out.alive[-1]),
            "overflow": out.overflow,
        }
    else:
        params["pmf"] = args.pmf
        law = yaglom_law(env, args.n, args.pmf)
        x, emp, _ = law.cdf_table()
        result = {
            "route": "exact",
            "a_n": a_n,
            "ks": law.ks,
            "ks_band": law.ks_band,
            "survival": law.survival,
            "kolmogorov_ratio": law.kolmogorov_ratio,
            "remainder": law.remainder,
        }
    rows = [(float(a), float(b), float(-math.expm1(-a))) for a, b in zip(x, emp)]
    return params, result, header, rows, EXIT_OK


def cmd_conditions(env: Environment, args):
    r = condition_report(env, args.horizon, args.eps)
    rows = [(k, float(r.A.values[k - 1]), float(r.B.values[k - 1]), float(r.C.values[k - 1]))
            for k in range(1, args.horizon + 1)]
    sl = lambda s: {"sup": s.sup, "argsup": s.argsup}
    result = {
        "A": sl(r.A), "B": sl(r.B), "C": sl(r.C), "B_half": sl(r.B_half),
        "gamma": r.gamma,
        "dominance_c_eps": r.prop_c_eps,
        "dominance_c_A": r.prop_c_A,
        "dominance_B_ok": r.dominance_B_ok,
        "dominance_A_ok": r.dominance_A_ok,
        "b_implies_a_ok": r.b_implies_a_ok,
    }
    return {"horizon": args.horizon, "eps": args.eps}, result, ("k", "cA", "cB", "cC"), rows, EXIT_OK


def cmd_shape(env: Environment, args):
    d = env.realize(args.k)
    grid = np.linspace(0.0, 1.0, args.points)
    evals = [phi(d, float(s)) for s in grid]
    cert = shape_certificate(d, grid)
    lo, hi, p1 = phi_prime_bounds(d)
    rows = [(e.s, e.phi, e.regime.value) for e in evals]
    result = {
        "law": repr(d),
        "phi0": cert.phi0,
        "phi1": cert.phi1,
        "phi_min": cert.phi_min,
        "phi_max": cert.phi_max,
        "certificate_holds": cert.holds,
        "phi_prime_lower": lo,
        "phi_prime_upper": hi,
        "phi_prime_at_one": p1,
    }
    return {"k": args.k, "points": args.points}, result, ("s", "phi", "regime"), rows, EXIT_OK


COMMANDS = {
    "moments": cmd_moments,
    "survival": cmd_survival,
    "classify": cmd_classify,
    "yaglom": cmd_yaglom,
    "conditions": cmd_conditions,
    "shape": cmd_shape,
}


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bpve", description="Branching processes in varying environment.")
    p.add_argument("--version", action="version", version=f"bpve {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("spec", help="environment spec (JSON file)")
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--csv", help="write plot data as CSV")
        return sp

    sp = add("moments", "moment table mu, nu, rho, S_nu, S_rho, J, L")
    sp.add_argument("--n", type=_positive, required=True)

    sp = add("survival", "exact survival curve and representation residuals")
    sp.add_argument("--n", type=_positive, required=True)
    sp.add_argument("--pmf", type=_positive, metavar="K", help="also report P(Z_n = j), j <= K")

    sp = add("classify", "criticality verdict with diagnostics")
    sp.add_argument("--horizon", type=_positive, required=True)
    d = ClassifyTolerances()
    for f in ("big", "small", "ratio", "tail", "stable", "window"):
        sp.add_argument(f"--{f}", type=float, default=getattr(d, f))
    sp.add_argument("--bounded-factor", type=float, default=d.bounded_factor)

    sp = add("yaglom", "conditional law of Z_n / a_n against Exp(1)")
    sp.add_argument("--n", type=_positive, required=True)
    route = sp.add_mutually_exclusive_group(required=True)
    route.add_argument("--pmf", type=_positive, metavar="K", help="exact route, truncation K")
    route.add_argument("--mc", type=_positive, metavar="PATHS", help="Monte Carlo route")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_positive, default=1)
    sp.add_argument("--block-size", type=_positive, default=1 << 16)
    sp.add_argument("--no-shortcut", action="store_true", help="draw every individual variate")

    sp = add("conditions", "regularity constants (A), (B), (C)")
    sp.add_argument("--horizon", type=_positive, required=True)
    sp.add_argument("--eps", type=float, default=0.5)

    sp = add("shape", "shape function of one generation's law")
    sp.add_argument("--k", type=_positive, default=1, help="generation")
    sp.add_argument("--points", type=_positive, default=101)
    return p


def run(argv: Sequence[str] | None = None) -> tuple[int, dict | None]:
    """Execute a command; returns (exit code, report)."""
    args = build_parser().parse_args(argv)
    try:
        with open(args.spec, "rb") as fh:
            spec_bytes = fh.read()
        env = Environment.from_spec(parse_spec(spec_bytes.decode("utf-8")))
    except (OSError, UnicodeDecodeError) as exc:
        print(f"bpve: cannot read spec: {exc}", file=sys.stderr)
        return EXIT_SPEC, None
    except SpecError as exc:
        print(f"bpve: spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC, None

    t0 = time.perf_counter()
    try:
        params, result, header, rows, code = COMMANDS[args.command](env, args)
    except SpecError as exc:
        print(f"bpve: spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC, None
    except NoSurvivorsError as exc:
        print(f"bpve: {exc}", file=sys.stderr)
        return EXIT_NO_SURVIVORS, None
    except RegimeError as exc:
        print(f"bpve: {exc}", file=sys.stderr)
        return EXIT_REGIME, None
    timing = {"seconds": round(time.perf_counter() - t0, 6)}
    if getattr(args, "workers", None) is not None:
        timing["workers"] = args.workers
    report = build_report(args.command, spec_bytes, params, result, timing)
    text = canonical_json(report) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.csv:
        write_csv(args.csv, header, rows)
    return code, report


def main(argv: Sequence[str] | None = None) -> int:
    return run(argv)[0]
