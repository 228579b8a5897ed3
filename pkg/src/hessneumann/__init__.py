"""Symmetric-function cone algebra, ellipticity sweeps, and a Newton/continuation
solver for the Robin problem of the transformed k-Hessian operator."""

from .symfun import (
    ConeError,
    sigma,
    sigma_all,
    sigma_excl,
    sigma_excl2,
    sigma_grad,
    in_gamma,
    cone_margin,
    newton_maclaurin_gap,
)
from .operator import (
    OperatorSpec,
    eta_from_lambda,
    lambda_from_eta,
    eta_matrix,
    f_value,
    f_grad,
    f_grad_matrix,
    admissible,
)
from .ellipticity import (
    ConeSampler,
    SweepReport,
    sample_eta,
    deleted_term_share,
    ellipticity_ratio,
    maclaurin_ratio,
    maclaurin_bound,
    trace_lower_bound,
    trace_check,
)
from .grid import BoxGrid, ScalarField
from .problem import (
    ProblemSpec,
    ClosedFormField,
    ProblemFormatError,
    paraboloid,
    perturbed_paraboloid,
    manufactured_problem,
    load_problem,
)
from .solver import (
    NewtonOptions,
    SolveReport,
    Diagnostics,
    NonconvergenceError,
    ContinuationError,
    hessian_at,
    residual,
    jacobian,
    newton_solve,
    continuation_solve,
    diagnostics,
)

__version__ = "0.1.0"
