"""Symplectic splitting propagators for i du/dt = H u.

Matrix-free approximation of exp(-i t H) u0 for real-symmetric H via
splitting methods, with stability/error analysis of any such method from
its coefficients, construction of new methods for (stages, order,
scaled-step) targets, and Chebyshev/Lanczos baselines.
"""

from .baselines import ChebyshevPlan, chebyshev_expm, lanczos_basis, lanczos_expm
from .design import (DesignTarget, PQPair, assemble_K, design_method,
                     factorize_K, optimize_pq, split_sum_of_squares)
from .errors import (FactorizationError, InfeasibleDesignError,
                     LossOfPrecisionError, NearResonanceError,
                     SpectralFactorizationError, SplitpropError,
                     StabilityError)
from .methods import SplittingMethod, builtin, load_method, save_method
from .operators import (GridSpec, HamiltonianOperator, fourier_hamiltonian,
                        gaussian_state, h_power_norm, poschl_teller_grid,
                        spectral_radius, tridiagonal_operator)
from .polynomials import ParityPolynomial
from .polyprop import (PropagationMatrix, StabilityReport, analyze, compose_K,
                       error_coefficients, phase_amplitude, q_polynomial,
                       stability_polynomial, stability_threshold)
from .propagate import (AprioriBound, PropagationRun, apriori_bound,
                        propagate, reference_propagate, step)

__version__ = "0.1.0"

__all__ = [
    "AprioriBound", "ChebyshevPlan", "DesignTarget", "FactorizationError",
    "GridSpec", "HamiltonianOperator", "InfeasibleDesignError",
    "LossOfPrecisionError", "NearResonanceError", "PQPair",
    "ParityPolynomial", "PropagationMatrix", "PropagationRun",
    "SpectralFactorizationError", "SplitpropError", "SplittingMethod",
    "StabilityError", "StabilityReport", "analyze", "apriori_bound",
    "assemble_K", "builtin", "chebyshev_expm", "compose_K", "design_method",
    "error_coefficients", "factorize_K", "fourier_hamiltonian",
    "gaussian_state", "h_power_norm", "lanczos_basis", "lanczos_expm",
    "load_method", "optimize_pq", "phase_amplitude", "poschl_teller_grid",
    "propagate", "q_polynomial", "reference_propagate", "save_method",
    "spectral_radius", "split_sum_of_squares", "stability_polynomial",
    "stability_threshold", "step",
]
