"""Linear-velocity reconstruction from contact-anchored kinematics.

A legged platform has no direct velocity sensor, but whenever a contact
point (anchor) is stationary in the world, the IMU velocity can be rebuilt
from quantities the robot already knows: the IMU pose in a contact-attached
frame, its finite-difference rates, the gyro, and the anchor's interpolated
position/velocity when support is shared between feet.

Frames: the "contact frame" is attached to the stance geometry; the world
pose of that frame is unknown (that is what the observer estimates), but
all inputs here are expressed inside it, so nothing below needs the world
pose.  KinematicSample.pos is the IMU position with the frame origin moved
to the anchor point; pos_rate is its finite-difference derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import skew, so3_log


class NoSupportError(ValueError):
    """Anchor interpolation was asked for with no supporting contact."""


class TimeOrderingError(ValueError):
    """A causal filter received samples with non-increasing timestamps."""


@dataclass(frozen=True)
class KinematicSample:
    """IMU pose in the contact frame, plus finite-difference rates.

    pos      -- IMU position, origin at the anchor point
    pos_rate -- derivative of pos (anchor-relative)
    rot      -- IMU orientation in the contact frame
    rot_rate -- IMU angular velocity relative to the contact frame,
                expressed in the IMU frame
    """

    pos: np.ndarray
    pos_rate: np.ndarray
    rot: np.ndarray
    rot_rate: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class AnchorState:
    """Anchor point of the contact frame and its transfer velocity.

    pos/vel are expressed in the contact frame; vel describes how the anchor
    point itself migrates (weight transfer), not any world motion.
    in_contact is False while every contact is broken, in which case the
    anchor holds its last value and vel is zero.
    """

    pos: np.ndarray
    vel: np.ndarray
    in_contact: bool = True


@dataclass(frozen=True)
class ContactFootState:
    """One foot: anchor candidate position (contact frame) and normal force."""

    pos: np.ndarray
    force: float

    def __post_init__(self):
        if self.force < 0.0:
            raise ValueError(f"contact force must be non-negative, got {self.force}")


def velocity_fixed_anchor(kin: KinematicSample, gyro: np.ndarray) -> np.ndarray:
    """IMU velocity (IMU frame) assuming the anchor point is world-fixed.

    v = R^T pdot + S(g - w) R^T p, where (p, pdot, R, w) come from the
    contact-frame kinematics and g is the gyro.  Exact whenever the motion
    really is a rigid rotation about the fixed anchor.
    """
    rel = kin.rot.T @ kin.pos
    return kin.rot.T @ kin.pos_rate + skew(gyro - kin.rot_rate) @ rel


def velocity_moving_anchor(
    kin: KinematicSample, anchor: AnchorState, gyro: np.ndarray
) -> np.ndarray:
    """IMU velocity when the anchor itself migrates at anchor.vel.

    Same lever-arm construction as velocity_fixed_anchor plus the transfer
    velocity mapped into the IMU frame.  kin must already be expressed with
    its origin at the current anchor (see reanchor).
    """
    rel = kin.rot.T @ kin.pos
    return (
        kin.rot.T @ kin.pos_rate
        + skew(gyro - kin.rot_rate) @ rel
        + kin.rot.T @ anchor.vel
    )


def reanchor(kin: KinematicSample, anchor: AnchorState) -> KinematicSample:
    """Re-express a contact-frame sample with its origin at the anchor.

    Subtracts the anchor position from pos and the transfer velocity from
    pos_rate, so that feeding the result to velocity_moving_anchor uses the
    anchor-relative rate consistently (the transfer velocity then cancels
    out of the velocity estimate except through the lever arm).
    """
    return KinematicSample(
        kin.pos - anchor.pos,
        kin.pos_rate - anchor.vel,
        kin.rot,
        kin.rot_rate,
        kin.t,
    )


def interpolate_anchor(left: ContactFootState, right: ContactFootState) -> np.ndarray:
    """Force-weighted anchor between two feet.

    Continuous through support transfers: as load shifts from one foot to
    the other the anchor slides along the segment between them.
    """
    total = left.force + right.force
    if total <= 0.0:
        raise NoSupportError("both feet unloaded; anchor undefined")
    return (left.force * left.pos + right.force * right.pos) / total


class VectorDifferentiator:
    """Causal backward difference; the first sample yields zero."""

    def __init__(self):
        self._prev: np.ndarray | None = None
        self._prev_t = 0.0

    def update(self, value: np.ndarray, t: float) -> np.ndarray:
        value = np.asarray(value, float)
        if self._prev is None:
            rate = np.zeros_like(value)
        else:
            dt = t - self._prev_t
            if dt <= 0.0:
                raise TimeOrderingError(f"non-increasing timestamp {t} after {self._prev_t}")
            rate = (value - self._prev) / dt
        self._prev = value.copy()
        self._prev_t = t
        return rate


class RotationDifferentiator:
    """Backward difference of a rotation stream.

    Returns the body-frame angular velocity w with R_k ~= R_{k-1} Exp(S(w dt)),
    i.e. the log of the incremental rotation divided by the step.
    """

    def __init__(self):
        self._prev: np.ndarray | None = None
        self._prev_t = 0.0

    def update(self, rot: np.ndarray, t: float) -> np.ndarray:
        if self._prev is None:
            rate = np.zeros(3)
        else:
            dt = t - self._prev_t
            if dt <= 0.0:
                raise TimeOrderingError(f"non-increasing timestamp {t} after {self._prev_t}")
            rate = so3_log(self._prev.T @ rot) / dt
        self._prev = rot.copy()
        self._prev_t = t
        return rate


class LowPass:
    """First-order low-pass with a fixed cutoff; seeded by the first sample."""

    def __init__(self, cutoff_hz: float):
        if cutoff_hz <= 0.0:
            raise ValueError("cutoff must be positive")
        self.tau = 1.0 / (2.0 * np.pi * cutoff_hz)
        self._state: np.ndarray | None = None
        self._prev_t = 0.0

    def update(self, value: np.ndarray, t: float) -> np.ndarray:
        value = np.asarray(value, float)
        if self._state is None:
            self._state = value.copy()
        else:
            dt = t - self._prev_t
            if dt <= 0.0:
                raise TimeOrderingError(f"non-increasing timestamp {t} after {self._prev_t}")
            self._state = self._state + (dt / (self.tau + dt)) * (value - self._state)
        self._prev_t = t
        return self._state


@dataclass
class AnchorTracker:
    """Maintains the anchor point and its filtered transfer velocity.

    Finite-differences the raw anchor trajectory and low-passes the result
    (force-derived anchors are noisy and differentiation amplifies that).
    While no contact is available the anchor holds its last position and the
    transfer velocity is reported as zero.
    """

    cutoff_hz: float = 50.0
    _diff: VectorDifferentiator = field(default_factory=VectorDifferentiator)
    _filter: LowPass | None = None
    _last: AnchorState | None = None

    def update(self, anchor_pos: np.ndarray | None, t: float) -> AnchorState:
        if self._filter is None:
            self._filter = LowPass(self.cutoff_hz)
        if anchor_pos is None:
            held = self._last.pos if self._last is not None else np.zeros(3)
            state = AnchorState(held.copy(), np.zeros(3), in_contact=False)
        else:
            raw_rate = self._diff.update(anchor_pos, t)
            vel = self._filter.update(raw_rate, t)
            state = AnchorState(np.asarray(anchor_pos, float).copy(), vel, in_contact=True)
        self._last = state
        return state


__all__ = [
    "AnchorState",
    "AnchorTracker",
    "ContactFootState",
    "KinematicSample",
    "LowPass",
    "NoSupportError",
    "RotationDifferentiator",
    "TimeOrderingError",
    "VectorDifferentiator",
    "interpolate_anchor",
    "reanchor",
    "velocity_fixed_anchor",
    "velocity_moving_anchor",
]
