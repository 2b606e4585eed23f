"""Vector and rotation kernels used by the observer and the simulator.

Everything operates on plain numpy arrays: 3-vectors of shape (3,) and
rotation matrices of shape (3, 3).  Rotation steps use the closed-form
axis-angle exponential so repeated stepping cannot drift off the manifold;
unit-sphere steps use an explicit Euler step followed by renormalization.
"""

from __future__ import annotations

import numpy as np

from .constants import CONSTRUCTION_TOL

# below this rotation angle the exponential/log switch to series expansions
_SMALL_ANGLE = 1e-8


class DegenerateStepError(ValueError):
    """A manifold step collapsed to an ill-defined configuration."""


def skew(v: np.ndarray) -> np.ndarray:
    """Matrix S(v) with S(v) @ w == cross(v, w)."""
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def so3_exp(phi: np.ndarray) -> np.ndarray:
    """Rotation matrix for the rotation vector phi (axis * angle)."""
    angle2 = float(phi @ phi)
    angle = np.sqrt(angle2)
    if angle < _SMALL_ANGLE:
        # second-order series; error O(angle^3) is below double roundoff here
        a = 1.0 - angle2 / 6.0
        b = 0.5 - angle2 / 24.0
    else:
        a = np.sin(angle) / angle
        b = (1.0 - np.cos(angle)) / angle2
    s = skew(phi)
    return np.eye(3) + a * s + b * (s @ s)


def so3_log(rot: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix (inverse of so3_exp)."""
    trace = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(trace)
    axial = np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    if angle < _SMALL_ANGLE:
        return 0.5 * axial
    if angle > np.pi - 1e-6:
        # near a half turn the axial part vanishes; recover the axis from
        # the symmetric part R + I = 2 (axis axis^T - ...) instead
        diag = np.diag(rot)
        k = int(np.argmax(diag))
        axis = np.sqrt(np.maximum((diag - trace) / (1.0 - trace), 0.0))
        axis /= np.linalg.norm(axis)
        signs = np.sign(axial)
        signs[signs == 0.0] = 1.0
        if signs[k] < 0:
            signs = -signs
        return angle * axis * signs
    return 0.5 * angle / np.sin(angle) * axial


def rotate_step(rot: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    """One attitude step under body angular velocity omega over dt.

    Integrates Rdot = R S(omega) exactly for constant omega, so the result
    stays orthonormal to machine precision for any step size.
    """
    return rot @ so3_exp(omega * dt)


def sphere_step(u: np.ndarray, udot: np.ndarray, dt: float) -> np.ndarray:
    """Euler step of a unit vector followed by renormalization.

    Raises DegenerateStepError when the raw step lands too close to the
    origin for the projection back to the sphere to make sense.
    """
    raw = u + udot * dt
    norm = np.linalg.norm(raw)
    if norm < CONSTRUCTION_TOL:
        raise DegenerateStepError(
            f"sphere step collapsed to norm {norm:.3e}; "
            "step size or tangent rate is far out of range"
        )
    return raw / norm


def normalized(v: np.ndarray) -> np.ndarray:
    """v scaled to unit norm; rejects near-zero input."""
    norm = np.linalg.norm(v)
    if norm < CONSTRUCTION_TOL:
        raise ValueError(f"cannot normalize near-zero vector (norm {norm:.3e})")
    return v / norm


def check_unit(v: np.ndarray, name: str = "vector") -> np.ndarray:
    """Validate that v is unit length within the construction tolerance."""
    err = abs(np.linalg.norm(v) - 1.0)
    if err > CONSTRUCTION_TOL:
        raise ValueError(f"{name} is not unit length (deviation {err:.3e})")
    return v


def check_rotation(rot: np.ndarray, name: str = "rotation") -> np.ndarray:
    """Validate orthonormality and det +1 within the construction tolerance."""
    err = float(np.max(np.abs(rot.T @ rot - np.eye(3))))
    if err > CONSTRUCTION_TOL or np.linalg.det(rot) < 0.0:
        raise ValueError(f"{name} is not a rotation matrix (deviation {err:.3e})")
    return rot


def rot_z(angle: float) -> np.ndarray:
    """Rotation about the world vertical by angle."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
