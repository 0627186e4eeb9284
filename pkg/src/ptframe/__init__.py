"""Hidden PT symmetry of passive non-Hermitian systems in the equilibrium frame."""

__version__ = "0.1.0"

from .algebra import EigResult, SpaceLayout, Subsystem, eig, expm
from .errors import (DimensionError, EigenSolverError, IllConditionedError, LayoutError,
                     NearEPError, NumericalError, ParameterError, PTFrameError,
                     SingularPointError)
from .frames import Decomposition, check_decomposition, ef_drift, eigenvalue_sum_check
from .models import (H1Params, H2Params, H3Params, analytic_eigs, build, supermodes,
                     tracked_subspace)
from .spectra import EPReport, SweepResult, detect_eps, reality_check, sweep
from .symmetry import parity_qubit, parity_two_mode, pt_residual

__all__ = [
    "EigResult", "SpaceLayout", "Subsystem", "eig", "expm",
    "DimensionError", "EigenSolverError", "IllConditionedError", "LayoutError",
    "NearEPError", "NumericalError", "ParameterError", "PTFrameError", "SingularPointError",
    "Decomposition", "check_decomposition", "ef_drift", "eigenvalue_sum_check",
    "H1Params", "H2Params", "H3Params", "analytic_eigs", "build", "supermodes",
    "tracked_subspace", "EPReport", "SweepResult", "detect_eps", "reality_check", "sweep",
    "parity_qubit", "parity_two_mode", "pt_residual",
]
