"""Branching processes in varying environment: exact recursions, shape
functions, regularity constants, classification and simulation."""

__version__ = "0.1.0"

from .offspring import (Binary, Binomial, DistributionError, FiniteSupport, Hypergeometric,
                        LinearFractional, NegativeBinomial, OffspringDistribution, Poisson,
                        Symmetric, dirac)
from .environment import Environment, MomentTable, SpecError, load_environment, moment_table, parse_spec
from .shape import phi, phi_value, shape_certificate, deviation_envelope, phi_prime_bounds
from .exact import (compose_pmf, composition_identity, paley_zygmund_sandwich, representation_check,
                    second_moments, survival, survival_curve, yaglom_law, yaglom_scale)
from .conditions import (ClassifyTolerances, Verdict, check_A, check_B, check_C, classify,
                         condition_report, lindvall_diagnostic, dominance_constants, divergence_panel)
from .montecarlo import SimConfig, SimOutcome, estimate_w_moments, simulate, yaglom_ks

__all__ = [name for name in dir() if not name.startswith("_")]
