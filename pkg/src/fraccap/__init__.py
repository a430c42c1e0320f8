"""Self-singularity-capturing finite-difference solver for fractional ODEs."""

from fraccap.capture import (
    CaptureConfig,
    CaptureResult,
    CaptureTrace,
    ObservedData,
    capture_auto,
    capture_fixed_m,
    misfit,
    misfit_gradient,
    newton_single,
    sigma_vs_dt_study,
)
from fraccap.corrections import (
    CorrectionSet,
    SigmaVector,
    condition_study,
    solve_correction_weights,
)
from fraccap.discretization import StencilCoefficients, TimeGrid, build_coefficients
from fraccap.errors import (
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FraccapError,
    PoleError,
    SingularSystemError,
)
from fraccap.manufactured import (
    ManufacturedSolution,
    component_errors,
    eval_exact,
    eval_forcing,
    sample_random_singularities,
)
from fraccap.solver import FdeProblem, SolutionSeries, integrate, l2_relative_error

__version__ = "0.1.0"
