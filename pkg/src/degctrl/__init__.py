"""Numerical laboratory for null controllability of coupled degenerate
parabolic systems on (0, 1) with diffusion x^alpha."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceFailure,
    DegCtrlError,
    DomainError,
    HypothesisViolated,
    HypothesisWarning,
    InvalidArgument,
    SingularIntegralError,
    SingularSystemError,
    UnsupportedParameter,
)
from .operators import (  # noqa: E402
    CoefficientSpec,
    Mesh,
    SystemConfig,
    assemble_coupled,
    assemble_diffusion,
    build_mesh,
    weighted_gradient_integral,
    weighted_integral,
)
from .evolution import (  # noqa: E402
    SpaceTimeField,
    energy_report,
    solve_adjoint_backward,
    solve_adjoint_forward,
    solve_forward,
)
from .weights import WeightParams, build_sigma, eval_weights, validate_params  # noqa: E402
from .inequality_lab import (  # noqa: E402
    caccioppoli_check,
    carleman_coupled,
    carleman_single,
    hardy_ratio,
    lemma_absorption_check,
    manufacture_solution,
)
from .hum_control import gramian_apply, hum_solve, observability_estimate  # noqa: E402
from .config import RunConfig, parse_config, serialize_config  # noqa: E402
