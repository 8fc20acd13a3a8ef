"""Robust prehensile-throw release control: analytical ballistic flowmap and
backward reachable tube, the real-time pullback tube acceleration QP, and the
stochastic release-window experiment that quantifies how closed-loop pullback
shrinks landing error under release-timing and actuation uncertainty.
"""

from .ballistics import (
    DEFAULT_LANDING_SLACK,
    GRAVITY,
    BallisticsConstants,
    DomainError,
    FlightState,
    TargetSpec,
    flight_time,
    flowmap_gradient,
    in_brt,
    landing_position,
    landing_velocity,
    nominal_release_velocity,
    propagate,
)
from .experiments import (
    AggregateStats,
    Condition,
    ConditionMesh,
    ControllerSpec,
    TrialRecord,
    build_mesh,
    error_trace_summary,
    run_batch,
)
from .release_sim import (
    ConstantVelocityController,
    PullbackController,
    ReleaseTrace,
    SimConfig,
    max_error_in_detach_window,
    simulate_release,
    write_trace_csv,
)
from .tube_qp import (
    DEFAULT_A_BOUNDS,
    DEFAULT_REGULARIZATION,
    DEFAULT_V_BOUNDS,
    EEMeasurement,
    EmptyBoxError,
    SolveStatus,
    TubeProblem,
    TubeSolution,
    assemble,
    pullback_command,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "BallisticsConstants",
    "Condition",
    "ConditionMesh",
    "ConstantVelocityController",
    "ControllerSpec",
    "DEFAULT_A_BOUNDS",
    "DEFAULT_LANDING_SLACK",
    "DEFAULT_REGULARIZATION",
    "DEFAULT_V_BOUNDS",
    "DomainError",
    "EEMeasurement",
    "EmptyBoxError",
    "FlightState",
    "GRAVITY",
    "PullbackController",
    "ReleaseTrace",
    "SimConfig",
    "SolveStatus",
    "TargetSpec",
    "TrialRecord",
    "TubeProblem",
    "TubeSolution",
    "assemble",
    "build_mesh",
    "error_trace_summary",
    "flight_time",
    "flowmap_gradient",
    "in_brt",
    "landing_position",
    "landing_velocity",
    "max_error_in_detach_window",
    "nominal_release_velocity",
    "propagate",
    "pullback_command",
    "run_batch",
    "simulate_release",
    "solve",
    "write_trace_csv",
]
