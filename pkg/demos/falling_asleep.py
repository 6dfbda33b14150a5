"""A mean-one environment in which the population eventually stops changing.

In generation k an individual has 0 or 2 children with probability
1/(2k^2) each and exactly one child otherwise.  Since sum 1/k^2 < inf, after
some random time every individual has exactly one child: the process
freezes at a positive level with positive probability.
"""
import math

from bpve import Environment, SimConfig, classify, lindvall_diagnostic, simulate, survival

env = Environment.from_spec('{"mode": "rule", "entries": [{"family": "symmetric", "p": "1/k^2"}]}')

for n in (1, 10, 100, 1000, 10000):
    print(f"P(Z_{n} > 0) = {survival(env, n)[0]:.6f}")

L, converged = lindvall_diagnostic(env, 10**4)
print(f"\nsum of P(Y_k != 1) up to 1e4: {L:.6f} (pi^2/6 = {math.pi**2 / 6:.6f}), converged: {converged}")

verdict = classify(env, 10**4)
print("verdict:", verdict.verdict.value)

h = 4000
out = simulate(env, SimConfig(paths=20000, horizon=h, seed=3, frozen_from=h // 2, shortcut=True))
print(f"\npaths constant and positive on [{h // 2}, {h}]: {out.frozen_fraction:.4f}")
print(f"  survivors at {h}: {out.survival[h]:.4f};  frozen among survivors: {out.frozen / out.alive[h]:.4f}")
values, counts = out.histogram()
print("  most common final sizes:", dict(zip(values[:6].tolist(), counts[:6].tolist())))
