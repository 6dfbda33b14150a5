"""Critical binary splitting: survival rate and the exponential limit.

Each individual has two children or none, with probability 1/2 each.  The
mean stays at one, S_nu(n) = n, and the survival probability decays like
2/n.  Conditioned on survival, Z_n / (n/2) is close to a standard
exponential variable.
"""
import numpy as np

from bpve import Binary, Environment, SimConfig, simulate, survival, yaglom_law, yaglom_ks

env = Environment.constant(Binary(0.5))

print("n      P(Z_n>0)     n P(Z_n>0)/2")
for n in (10, 100, 1000, 2000):
    p, _ = survival(env, n)
    print(f"{n:<6d} {p:.6e}  {n * p / 2:.4f}")

# exact conditional law from composed generating functions
n = 500
law = yaglom_law(env, n, K=15 * n)
print(f"\nexact law at n={n}: a_n={law.a_n:g}, KS distance to Exp(1) = {law.ks:.4f}")

x, cdf, exp_cdf = law.cdf_table()
for q in (0.5, 1.0, 2.0):
    i = np.searchsorted(x, q)
    print(f"  P(Z_n/a_n <= {x[i]:.3f} | Z_n>0) = {cdf[i]:.4f}   vs 1-exp(-x) = {exp_cdf[i]:.4f}")

# the same from simulation, with the binomial shortcut for generation sums
out = simulate(env, SimConfig(paths=10**6, horizon=n, seed=1, shortcut=True))
print(f"\nsimulated: {out.alive[n]} survivors, p_hat = {out.survival[n]:.3e} "
      f"(exact {law.survival:.3e}), KS = {yaglom_ks(out, law.a_n):.4f}")
