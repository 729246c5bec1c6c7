"""Variational estimation of transport-entropy inequality constants on
finite metric spaces: exact discrete optimal transport with conjugate dual
potentials, minimization of alpha(aH) - beta(T_c), and constant brackets for
Talagrand, log-Sobolev and transport-information inequalities."""

from ._kernels import IMPL as solver_backend
from .errors import TransIneqError
from .instances import (
    Instance,
    double_well_grid,
    gaussian_grid,
    grid_space,
    load_instance,
    mixture_grid,
    parse_instance,
    random_instance,
)
from .inequalities import (
    Bracket,
    ConstantsReport,
    SuiteConfig,
    SupEstimate,
    build_semiconcave_class,
    constants_report,
    dual_value,
    estimate_a_mu,
    estimate_lsi,
    estimate_t2,
    estimate_w2i,
    ma_residual_1d,
    verify_otto_villani,
    verify_restricted_lsi,
)
from .measures import (
    ProbVector,
    concentration_profile,
    check_concentration_bound,
    exp_integral,
    fisher_information,
    fit_concentration_constants,
    prob_vector,
    relative_entropy,
    total_variation,
)
from .metric import (
    CostProfile,
    FiniteMetricSpace,
    PowerTypeCost,
    SlopeOperator,
    build_cost,
    induced_distance,
    slope,
    validate_space,
)
from .transport import (
    TransportSolution,
    c_transform,
    check_solution,
    ot_solve,
    transport_cost,
    truncate_cost,
)
from .variational import (
    FunctionalSpec,
    MinimizationResult,
    MinimizeConfig,
    Profile,
    evaluate,
    first_variation,
    lower_bound_certificate,
    minimize_fixed_point,
    minimize_mirror,
    minimize_truncation,
    spec_from_names,
)

__version__ = "0.1.0"
