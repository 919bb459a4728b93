"""Signed-distance calculus, boundary flows and HJB checks for set-valued functions."""

from .errors import *  # noqa: F401,F403
from .geometry import (
    ConvexPolygon,
    DerivativeBundle,
    GraphPoint,
    IntrinsicDerivatives,
    SetOracle,
    boundary_hausdorff,
    boundary_sample,
    fd_derivative_bundle,
    hausdorff_distance,
    intrinsic_derivatives,
    make_graph_point,
    normal,
    project_to_boundary,
    signed_distance,
    tangent_basis,
    tangent_project,
)
from .flows import (
    DiffusionSpec,
    GeodesicTrajectory,
    ItoFlowResult,
    TangentFieldSpec,
    geodesic_length,
    geodesic_ode,
    ito_flow_simulate,
    length_comparison,
    surjectivity_check,
)
from .hamiltonian import (
    ControlProblem,
    ControlSet,
    HamiltonianValue,
    HJBResidual,
    correction_K,
    hamiltonian_sup,
    hat_equation_residual,
    hjb_residual,
    scalar_reduction_residual,
    set_heat_residual,
)
from .mean_variance import (
    MVParams,
    MVPath,
    moving_scalarization,
    optimal_control,
    simulate_optimal,
    static_solution,
    time_consistency_check,
    value_process,
)
from .reference_sets import (
    BallSet,
    IntervalSet,
    MeanVarianceSet,
    NonconvexSet,
    ball_oracle,
    convexity_check,
    interval_oracle,
    mean_variance_oracle,
    nonconvex_oracle,
    product_graph_oracle,
)
from .verification import (
    OptimalFeedback,
    VerificationRun,
    feedback_from_hamiltonian,
    scalar_hjb_solve,
    verification_sde_simulate,
)

__version__ = "0.1.0"
