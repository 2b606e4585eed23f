import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from tiltobs.geometry import (
    DegenerateStepError,
    check_rotation,
    check_unit,
    normalized,
    rot_z,
    rotate_step,
    skew,
    so3_exp,
    so3_log,
    sphere_step,
)


def test_skew_matches_cross_product(rng):
    for _ in range(20):
        v, w = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(skew(v) @ w, np.cross(v, w), atol=1e-15)
    assert np.allclose(skew(v).T, -skew(v))


@pytest.mark.parametrize("scale", [1e-12, 1e-9, 1e-3, 0.5, 2.0, 3.1])
def test_so3_exp_against_scipy(rng, scale):
    for _ in range(10):
        phi = rng.normal(size=3)
        phi *= scale / np.linalg.norm(phi)
        expected = Rotation.from_rotvec(phi).as_matrix()
        got = so3_exp(phi)
        assert np.abs(got - expected).max() < 1e-12
        check_rotation(got)


def test_so3_log_round_trip(rng):
    for _ in range(50):
        phi = rng.normal(size=3)
        phi *= rng.uniform(1e-10, np.pi - 1e-3) / np.linalg.norm(phi)
        back = so3_log(so3_exp(phi))
        assert np.abs(back - phi).max() < 1e-9


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_so3_log_half_turn(axis):
    phi = np.zeros(3)
    phi[axis] = np.pi
    back = so3_log(so3_exp(phi))
    # at a half turn the sign of the axis is a convention; the rotation is not
    assert np.abs(so3_exp(back) - so3_exp(phi)).max() < 1e-9
    assert abs(np.linalg.norm(back) - np.pi) < 1e-9


def test_so3_log_near_half_turn():
    phi = np.array([0.3, -0.8, 0.52])
    phi *= (np.pi - 1e-8) / np.linalg.norm(phi)
    back = so3_log(so3_exp(phi))
    assert np.abs(so3_exp(back) - so3_exp(phi)).max() < 1e-6


def test_rotate_step_stays_orthonormal_over_many_steps():
    # each step multiplies by an exact rotation, so the only drift is
    # rounding in the matrix products; it stays well under n * eps
    n = 100_000
    rot = np.eye(3)
    omega = np.array([0.3, -0.2, 0.9])
    for _ in range(n):
        rot = rotate_step(rot, omega, 1e-3)
    assert np.abs(rot.T @ rot - np.eye(3)).max() < n * np.finfo(float).eps
    assert np.linalg.det(rot) > 0.0


def test_rotate_step_exact_for_constant_rate():
    omega = np.array([0.1, 0.7, -0.4])
    rot = np.eye(3)
    n, dt = 500, 2e-3
    for _ in range(n):
        rot = rotate_step(rot, omega, dt)
    assert np.abs(rot - so3_exp(omega * n * dt)).max() < 1e-12


def test_sphere_step_renormalizes(rng):
    u = normalized(rng.normal(size=3))
    stepped = sphere_step(u, rng.normal(size=3), 0.01)
    assert abs(np.linalg.norm(stepped) - 1.0) < 1e-15


def test_sphere_step_rejects_collapse():
    u = np.array([0.0, 0.0, 1.0])
    with pytest.raises(DegenerateStepError):
        sphere_step(u, -u, 1.0)


def test_normalized_and_check_unit():
    v = np.array([3.0, 0.0, 4.0])
    assert np.allclose(normalized(v), v / 5.0)
    with pytest.raises(ValueError):
        normalized(np.zeros(3))
    check_unit(np.array([0.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        check_unit(np.array([0.0, 1.1, 0.0]))


def test_check_rotation_rejects_reflection():
    flip = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        check_rotation(flip)


def test_rot_z_matches_exponential():
    for angle in (-2.0, -0.3, 0.0, 0.9, 3.0):
        assert np.abs(
            rot_z(angle) - so3_exp(np.array([0.0, 0.0, angle]))
        ).max() < 1e-14
