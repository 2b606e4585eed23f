"""Two-stage tilt observer for a velocity-aided IMU.

The estimator carries three states:

  velocity   -- estimate of the sensor-frame linear velocity (R^3)
  tilt_free  -- unconstrained intermediate estimate of the gravity
                direction in the sensor frame (R^3, not normalized)
  tilt       -- unit-norm gravity-direction estimate (S^2)

With gyro reading g, accelerometer reading a, aided velocity v_m and
gravity g0, the continuous dynamics are

  d(velocity)  = -S(g) velocity - g0 tilt_free + a + alpha1 (v_m - velocity)
  d(tilt_free) = -S(g) tilt_free - (alpha2 / g0) (v_m - velocity)
  d(tilt)      = -S(g - gamma S(tilt) tilt_free) tilt

The first two lines form a linear velocity/tilt stage that is globally
exponentially stable on its own; the third line grafts a unit-norm state
onto it, which is what downstream consumers (orientation fusion, control)
actually want.  Discretization is explicit Euler, with the tilt line
stepped on the sphere (Euler plus renormalization).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constants import GRAVITY
from .geometry import check_unit, normalized, rot_z, skew, so3_exp, sphere_step

_EZ = np.array([0.0, 0.0, 1.0])


class DegenerateGeometryError(ValueError):
    """Inputs are in a configuration with no well-defined answer."""


@dataclass(frozen=True)
class Gains:
    """Observer gains; all three must be positive.

    alpha1 weighs the velocity-aiding correction, alpha2 the coupling from
    the velocity error into the intermediate tilt, gamma the pull of the
    unit tilt toward the intermediate estimate.
    """

    alpha1: float
    alpha2: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "gamma"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"gain {name} must be positive")

    def check_step_size(self, dt: float) -> None:
        """Explicit Euler on the velocity line is stable only for dt < 2/alpha1."""
        if not 0.0 < dt < 2.0 / self.alpha1:
            raise ValueError(
                f"step size {dt} outside the stable range (0, {2.0 / self.alpha1})"
                " for alpha1"
            )


@dataclass(frozen=True)
class ImuSample:
    """One gyro/accelerometer reading pair, sensor frame, at time t."""

    gyro: np.ndarray
    accel: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class ObserverState:
    velocity: np.ndarray
    tilt_free: np.ndarray
    tilt: np.ndarray

    def __post_init__(self):
        check_unit(self.tilt, "tilt")

    @classmethod
    def initialize(
        cls, vel_meas: np.ndarray, tilt_guess: np.ndarray | None = None
    ) -> "ObserverState":
        """Start from the first aided-velocity sample and a tilt guess.

        Both tilt states take the guess (vertical when omitted); callers with
        an at-rest accelerometer snapshot can seed tilt_free separately.
        """
        guess = _EZ if tilt_guess is None else normalized(np.asarray(tilt_guess, float))
        return cls(np.asarray(vel_meas, float).copy(), guess.copy(), guess.copy())


def _check_finite(name: str, value: np.ndarray) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"non-finite value in {name}: {np.asarray(value)}")


def observer_derivative(
    state: ObserverState,
    gyro: np.ndarray,
    accel: np.ndarray,
    vel_meas: np.ndarray,
    gains: Gains,
    g0: float = GRAVITY,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Continuous-time derivatives of the three observer states.

    The tilt derivative is tangent to the sphere by construction
    (it is a rotation rate applied to a unit vector).
    """
    vel_err = vel_meas - state.velocity
    sg = skew(gyro)
    d_vel = -sg @ state.velocity - g0 * state.tilt_free + accel + gains.alpha1 * vel_err
    d_tf = -sg @ state.tilt_free - (gains.alpha2 / g0) * vel_err
    corr = gyro - gains.gamma * (skew(state.tilt) @ state.tilt_free)
    d_tilt = -skew(corr) @ state.tilt
    return d_vel, d_tf, d_tilt


def observer_step(
    state: ObserverState,
    imu: ImuSample,
    vel_meas: np.ndarray,
    gains: Gains,
    dt: float,
    g0: float = GRAVITY,
) -> ObserverState:
    """One explicit Euler step; the unit tilt is renormalized afterwards."""
    _check_finite("imu.gyro", imu.gyro)
    _check_finite("imu.accel", imu.accel)
    _check_finite("vel_meas", vel_meas)
    d_vel, d_tf, d_tilt = observer_derivative(state, imu.gyro, imu.accel, vel_meas, gains, g0)
    return ObserverState(
        state.velocity + dt * d_vel,
        state.tilt_free + dt * d_tf,
        sphere_step(state.tilt, d_tilt, dt),
    )


def intermediate_estimator_step(
    state: ObserverState,
    imu: ImuSample,
    vel_meas: np.ndarray,
    gains: Gains,
    dt: float,
    g0: float = GRAVITY,
) -> ObserverState:
    """Step only the velocity/tilt_free stage; tilt is left untouched.

    tilt_free is deliberately not normalized: its transient excursions off
    the unit sphere are the price the linear stage pays for global
    exponential stability, and the comparison harness measures them.
    """
    _check_finite("imu.gyro", imu.gyro)
    _check_finite("imu.accel", imu.accel)
    _check_finite("vel_meas", vel_meas)
    vel_err = vel_meas - state.velocity
    sg = skew(imu.gyro)
    d_vel = -sg @ state.velocity - g0 * state.tilt_free + imu.accel + gains.alpha1 * vel_err
    d_tf = -sg @ state.tilt_free - (gains.alpha2 / g0) * vel_err
    return replace(
        state,
        velocity=state.velocity + dt * d_vel,
        tilt_free=state.tilt_free + dt * d_tf,
    )


def triad_fuse(tilt: np.ndarray, yaw_ref: float) -> np.ndarray:
    """Full attitude from a tilt estimate and a reference heading.

    Builds the unique rotation R with R @ tilt == e_z (so R^T e_z is exactly
    the supplied tilt) whose heading, read as atan2(R[1,0], R[0,0]), equals
    yaw_ref.  The heading reference acts as a virtual horizontal direction:
    it fixes the one degree of freedom the tilt leaves open.

    Degenerate when the tilt points straight down the reference vertical
    (antipodal to e_z): no continuous choice of heading frame exists there.
    """
    tilt = check_unit(np.asarray(tilt, float), "tilt")
    c = float(tilt @ _EZ)
    if c < -1.0 + 1e-12:
        raise DegenerateGeometryError(
            "tilt is antipodal to the reference vertical; attitude undefined"
        )
    axis = np.cross(tilt, _EZ)
    s2 = float(axis @ axis)
    if s2 < 1e-30:
        base = np.eye(3)
    else:
        # minimal rotation taking tilt onto e_z, via the Rodrigues form
        sk = skew(axis)
        base = np.eye(3) + sk + sk @ sk * ((1.0 - c) / s2)
    yaw0 = np.arctan2(base[1, 0], base[0, 0])
    return rot_z(yaw_ref - yaw0) @ base


class TiltObserver:
    """Stateful convenience wrapper around observer_step.

    Validates the step size against the explicit-Euler stability bound once,
    at construction.
    """

    def __init__(
        self,
        gains: Gains,
        dt: float,
        g0: float = GRAVITY,
        state: ObserverState | None = None,
    ):
        gains.check_step_size(dt)
        self.gains = gains
        self.dt = dt
        self.g0 = g0
        self.state = state if state is not None else ObserverState.initialize(np.zeros(3))

    def step(self, imu: ImuSample, vel_meas: np.ndarray) -> ObserverState:
        self.state = observer_step(self.state, imu, vel_meas, self.gains, self.dt, self.g0)
        return self.state

    def attitude(self, yaw_ref: float = 0.0) -> np.ndarray:
        """Current attitude estimate, with heading pinned to yaw_ref."""
        return triad_fuse(self.state.tilt, yaw_ref)


def tilt_error_angle(tilt_est: np.ndarray, tilt_true: np.ndarray) -> float:
    """Angle between two direction vectors, radians, robust near 0 and pi."""
    cross = np.linalg.norm(np.cross(tilt_est, tilt_true))
    dot = float(tilt_est @ tilt_true)
    return float(np.arctan2(cross, dot))
