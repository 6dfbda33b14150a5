"""The four regimes side by side, with the quantities that decide them."""
from bpve import Binary, Environment, Poisson, classify

envs = {
    "growing means n+2 atoms": Environment.from_spec(
        '{"mode": "rule", "entries": [{"family": "finite", "atoms": [[0, "1-1/k"], ["k+2", "1/k"]]}]}'),
    "symmetric 1/k^2": Environment.from_spec(
        '{"mode": "rule", "entries": [{"family": "symmetric", "p": "1/k^2"}]}'),
    "binary p=1/2": Environment.constant(Binary(0.5)),
    "binary p=0.8": Environment.constant(Binary(0.8)),
    "poisson 0.5": Environment.constant(Poisson(0.5)),
    # critical for a while, then subcritical: no proxy fits
    "mixed": Environment.from_list([Binary(0.5)] * 9000 + [Binary(0.45)] * 1000),
}

H = 10**4
print(f"{'environment':<26} {'verdict':<26} {'log mu_n':>10} {'S_nu(n)':>12} {'r_n':>10}")
for name, env in envs.items():
    c = classify(env, H)
    d = c.diagnostics
    print(f"{name:<26} {c.verdict.value:<26} {d['log_mu']:>10.2f} {d['S_nu']:>12.4g} {d['r_n']:>10.3g}")
