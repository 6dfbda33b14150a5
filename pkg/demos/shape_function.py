"""The shape function phi of a few offspring laws and its two-sided bounds."""
import numpy as np

from bpve import Binary, LinearFractional, Poisson, dirac, shape_certificate, phi_prime_bounds
from bpve.shape import phi_grid

grid = np.linspace(0, 1, 6)
for d in (dirac(2), Binary(0.5), Poisson(1.0), Poisson(4.0), LinearFractional(0.3, 0.8)):
    vals = phi_grid(d, grid)
    cert = shape_certificate(d)
    lo, hi, slope1 = phi_prime_bounds(d)
    print(f"{d!r}")
    print("   phi:", " ".join(f"{v:.4f}" for v in vals))
    print(f"   phi(0)/2 = {cert.phi0 / 2:.4f} <= min {cert.phi_min:.4f};  max {cert.phi_max:.4f} <= 2 phi(1) = "
          f"{2 * cert.phi1:.4f}")
    print(f"   phi'(1) = {slope1:.4f}, slope bounds [{lo:.3f}, {hi:.3f}]")
