"""Numerical lab for the regularized curvature flow of pinned plane curves."""

from .convergence import (
    ConvergenceReport,
    SweepConfig,
    ck_distance,
    run_sweep,
    singularity_time_estimate,
)
from .errors import (
    BadExponent,
    BadParams,
    ConfigError,
    CurveError,
    DegenerateCurve,
    IoError,
    OutOfDomain,
    ReparamFailure,
    SingularityDetected,
    SolverFailure,
    WindowMismatch,
)
from .estimates import (
    DiagnosticsRecord,
    boundary_residuals,
    comparison_check,
    dissipation_residual,
    energy,
    gn_check,
    gn_specialized_u4,
    gn_specialized_u6,
)
from .flow import (
    FlowConfig,
    FlowState,
    Terminated,
    Trajectory,
    curvature_evolution_rhs,
    normal_velocity,
    run,
    step,
    tangential_velocity,
)
from .geometry import (
    DiscreteCurve,
    GeometryCache,
    Point2,
    arclength_derivative,
    compute_geometry,
    make_initial_curve,
    reparametrize_constant_speed,
)
from .gronwall import GronwallSetup, GronwallSolution, doubling_time, gronwall_solve

__all__ = [
    "BadExponent",
    "BadParams",
    "ConfigError",
    "ConvergenceReport",
    "CurveError",
    "DegenerateCurve",
    "DiagnosticsRecord",
    "DiscreteCurve",
    "FlowConfig",
    "FlowState",
    "GeometryCache",
    "GronwallSetup",
    "GronwallSolution",
    "IoError",
    "OutOfDomain",
    "Point2",
    "ReparamFailure",
    "SingularityDetected",
    "SolverFailure",
    "SweepConfig",
    "Terminated",
    "Trajectory",
    "WindowMismatch",
    "arclength_derivative",
    "boundary_residuals",
    "ck_distance",
    "comparison_check",
    "compute_geometry",
    "curvature_evolution_rhs",
    "dissipation_residual",
    "doubling_time",
    "energy",
    "gn_check",
    "gn_specialized_u4",
    "gn_specialized_u6",
    "gronwall_solve",
    "make_initial_curve",
    "normal_velocity",
    "reparametrize_constant_speed",
    "run",
    "run_sweep",
    "singularity_time_estimate",
    "step",
    "tangential_velocity",
]
