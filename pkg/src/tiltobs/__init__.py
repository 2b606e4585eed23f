"""Lyapunov-stable tilt estimation for velocity-aided IMUs.

The package has three layers:

  observer / anchor   the estimator itself and the contact-anchored
                      velocity reconstruction that feeds it
  analysis            error dynamics, Lyapunov certificate, linearization
                      spectra, batched numerical verification
  simulator / cli     a desk-scale rigid-body test stand, trajectory
                      logging, and the command-line harness
"""

from .anchor import (
    AnchorState,
    AnchorTracker,
    ContactFootState,
    KinematicSample,
    NoSupportError,
    TimeOrderingError,
    interpolate_anchor,
    reanchor,
    velocity_fixed_anchor,
    velocity_moving_anchor,
)
from .analysis import (
    CertificateSweepResult,
    ConvergenceSweepResult,
    ErrorState,
    LinearizationReport,
    all_linearization_reports,
    analyze_linearization,
    certificate_matrix,
    certificate_sweep,
    convergence_sweep,
    error_derivative,
    lyapunov_V,
    lyapunov_Vdot_bound,
    measure_convergence_rate,
    predicted_spectrum,
    trace_error_norm,
)
from .config import ConfigError, RunConfig, VerifyConfig, load_config, parse_config, serialize_config
from .constants import GRAVITY
from .observer import (
    DegenerateGeometryError,
    Gains,
    ImuSample,
    ObserverState,
    TiltObserver,
    intermediate_estimator_step,
    observer_step,
    tilt_error_angle,
    triad_fuse,
)
from .simulator import (
    ContactModel,
    ImuNoiseModel,
    ImuOffset,
    PushEvent,
    RigidBodyState,
    Scenario,
    SimulationDivergedError,
    SimulationResult,
    run_scenario,
    standing_state,
)
from .trajlog import COLUMNS, TrajectoryLog

__version__ = "0.1.0"

__all__ = [
    "AnchorState",
    "AnchorTracker",
    "CertificateSweepResult",
    "COLUMNS",
    "ConfigError",
    "ContactFootState",
    "ContactModel",
    "ConvergenceSweepResult",
    "DegenerateGeometryError",
    "ErrorState",
    "Gains",
    "GRAVITY",
    "ImuNoiseModel",
    "ImuOffset",
    "ImuSample",
    "KinematicSample",
    "LinearizationReport",
    "NoSupportError",
    "ObserverState",
    "PushEvent",
    "RigidBodyState",
    "RunConfig",
    "Scenario",
    "SimulationDivergedError",
    "SimulationResult",
    "TiltObserver",
    "TimeOrderingError",
    "TrajectoryLog",
    "VerifyConfig",
    "all_linearization_reports",
    "analyze_linearization",
    "certificate_matrix",
    "certificate_sweep",
    "convergence_sweep",
    "error_derivative",
    "interpolate_anchor",
    "intermediate_estimator_step",
    "load_config",
    "lyapunov_V",
    "lyapunov_Vdot_bound",
    "measure_convergence_rate",
    "observer_step",
    "parse_config",
    "predicted_spectrum",
    "reanchor",
    "run_scenario",
    "serialize_config",
    "standing_state",
    "tilt_error_angle",
    "trace_error_norm",
    "triad_fuse",
    "velocity_fixed_anchor",
    "velocity_moving_anchor",
]
