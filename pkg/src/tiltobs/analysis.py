"""Stability analysis of the observer's estimation-error dynamics.

In world-aligned coordinates the error dynamics of the two-stage tilt
observer become autonomous:

    d(z1)  = -a1 z1 - g0 z2p          velocity error, m/s
    d(z2p) = (a2/g0) z1               free-stage tilt error
    d(z2)  = gm S^2(e_z - z2)(z2 - z2p)   constrained tilt error

with e_z - z2 confined to the unit sphere.  This module provides the
vector field in both the world-aligned (autonomous) and body-frame
(gyro-coupled) representations, the quadratic certificate V with its
decrease bound, the three linearization matrices with closed-form
spectra for cross-checking numeric eigensolvers, convergence-rate
fitting, and batch sweep drivers built on the compiled kernels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .constants import CONSTRUCTION_TOL, GRAVITY
from .geometry import skew
from .observer import Gains

_EZ = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class ErrorState:
    """Observer error in world-aligned coordinates.

    z1 is the velocity error (m/s), z2p the free-stage tilt error, z2 the
    constrained tilt error.  The direction e_z - z2 must be a unit vector;
    the constructor enforces this so downstream code can rely on it.
    """

    z1: np.ndarray
    z2p: np.ndarray
    z2: np.ndarray

    def __post_init__(self):
        for name in ("z1", "z2p", "z2"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector, got shape {v.shape}")
            object.__setattr__(self, name, v)
        u = _EZ - self.z2
        if abs(np.linalg.norm(u) - 1.0) > CONSTRUCTION_TOL:
            raise ValueError("e_z - z2 must lie on the unit sphere")

    @property
    def direction(self) -> np.ndarray:
        """The unit vector e_z - z2."""
        return _EZ - self.z2

    def norm(self) -> float:
        """Total error norm sqrt(|z1|^2 + |z2p|^2 + |z2|^2)."""
        return float(np.sqrt(
            self.z1 @ self.z1 + self.z2p @ self.z2p + self.z2 @ self.z2
        ))

    def packed(self) -> np.ndarray:
        """Kernel layout: [z1, z2p, e_z - z2] as a flat length-9 array."""
        return np.concatenate([self.z1, self.z2p, _EZ - self.z2])

    @classmethod
    def from_packed(cls, arr: np.ndarray) -> "ErrorState":
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0:3], arr[3:6], _EZ - arr[6:9])


def error_derivative(xi: ErrorState, gains: Gains, g0: float = GRAVITY):
    """Autonomous error vector field; returns (dz1, dz2p, dz2)."""
    dz1 = -gains.alpha1 * xi.z1 - g0 * xi.z2p
    dz2p = (gains.alpha2 / g0) * xi.z1
    su = skew(_EZ - xi.z2)
    dz2 = gains.gamma * (su @ (su @ (xi.z2 - xi.z2p)))
    return dz1, dz2p, dz2


def error_derivative_body(x1t, x2pt, x2t, gyro, tilt_true, gains: Gains,
                          g0: float = GRAVITY):
    """Body-frame error vector field; returns the three derivatives.

    This is the representation the observer actually produces: errors
    expressed in the sensor frame, coupled to the gyro reading and to the
    true tilt.  Rotating each error into world-aligned coordinates turns
    this field into the autonomous one of error_derivative; a test
    integrates both and checks the correspondence.
    """
    x1t = np.asarray(x1t, dtype=float)
    x2pt = np.asarray(x2pt, dtype=float)
    x2t = np.asarray(x2t, dtype=float)
    sg = skew(np.asarray(gyro, dtype=float))
    tilt_hat = np.asarray(tilt_true, dtype=float) - x2t
    sh = skew(tilt_hat)
    d1 = -sg @ x1t - gains.alpha1 * x1t - g0 * x2pt
    d2p = -sg @ x2pt + (gains.alpha2 / g0) * x1t
    d2 = -sg @ x2t + gains.gamma * (sh @ (sh @ (x2t - x2pt)))
    return d1, d2p, d2


def lyapunov_V(xi: ErrorState, gains: Gains, g0: float = GRAVITY) -> float:
    """Quadratic certificate; zero only at the origin, radially unbounded."""
    a1, a2, gm = gains.alpha1, gains.alpha2, gains.gamma
    h = a1 * xi.z1 + g0 * xi.z2p
    return float(
        a2 / (8.0 * a1 * g0) * (xi.z1 @ xi.z1)
        + 1.0 / (8.0 * a1 * g0) * (h @ h)
        + a1 * g0 / (4.0 * a2) * (xi.z2p @ xi.z2p)
        + 1.0 / (2.0 * gm) * (xi.z2 @ xi.z2)
    )


def certificate_matrix(gains: Gains, g0: float = GRAVITY) -> np.ndarray:
    """The 3x3 matrix H bounding the certificate's decrease rate.

    H acts on (|z1|, |z2p|, |S(e_z) z2|); it is positive definite exactly
    when g0 > 1, which holds for any physical gravity value.
    """
    a1 = gains.alpha1
    return np.array([
        [a1 * a1 / (4.0 * g0), 0.0, 0.0],
        [0.0, g0 / 4.0, -0.5],
        [0.0, -0.5, 1.0],
    ])


def lyapunov_Vdot_bound(xi: ErrorState, gains: Gains, g0: float = GRAVITY):
    """Analytic derivative of V along the flow and its quadratic bound.

    Returns (vdot, bound) with the contract vdot <= bound + 1e-10.  vdot is
    the gradient of V contracted with the vector field, not a finite
    difference, so the comparison is exact up to rounding.
    """
    a1, a2, gm = gains.alpha1, gains.alpha2, gains.gamma
    dz1, dz2p, dz2 = error_derivative(xi, gains, g0)
    h = a1 * xi.z1 + g0 * xi.z2p
    grad_z1 = a2 / (4.0 * a1 * g0) * xi.z1 + a1 / (4.0 * a1 * g0) * h
    grad_z2p = 1.0 / (8.0 * a1 * g0) * 2.0 * g0 * h + a1 * g0 / (2.0 * a2) * xi.z2p
    grad_z2 = xi.z2 / gm
    vdot = float(grad_z1 @ dz1 + grad_z2p @ dz2p + grad_z2 @ dz2)
    w = skew(_EZ) @ xi.z2
    rho = np.array([
        np.linalg.norm(xi.z1),
        np.linalg.norm(xi.z2p),
        np.linalg.norm(w),
    ])
    bound = float(-rho @ certificate_matrix(gains, g0) @ rho)
    return vdot, bound


# ---------------------------------------------------------------------------
# linearizations


def _s2ez() -> np.ndarray:
    s = skew(_EZ)
    return s @ s


def build_A1(gains: Gains) -> np.ndarray:
    """Linearization of the first two error equations in scaled coordinates
    ((a2/g0) z1, z2p); 6x6, globally valid since that subsystem is linear."""
    a = np.zeros((6, 6))
    a[0:3, 0:3] = -gains.alpha1 * np.eye(3)
    a[0:3, 3:6] = -gains.alpha2 * np.eye(3)
    a[3:6, 0:3] = np.eye(3)
    return a


def build_A2(gains: Gains, g0: float = GRAVITY) -> np.ndarray:
    """Linearization at the antipodal equilibrium (z2 = 2 e_z); 9x9 on the
    state (z1, z2p, z2 - 2 e_z)."""
    a = np.zeros((9, 9))
    s2 = _s2ez()
    a[0:3, 0:3] = -gains.alpha1 * np.eye(3)
    a[0:3, 3:6] = -g0 * np.eye(3)
    a[3:6, 0:3] = (gains.alpha2 / g0) * np.eye(3)
    a[6:9, 3:6] = -gains.gamma * s2
    a[6:9, 6:9] = -gains.gamma * s2
    return a


def build_A3(gains: Gains, g0: float = GRAVITY) -> np.ndarray:
    """Linearization at the origin in sphere-tangent coordinates
    (z1, z2p, horizontal projection of z2); 8x8."""
    a = np.zeros((8, 8))
    proj = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    a[0:3, 0:3] = -gains.alpha1 * np.eye(3)
    a[0:3, 3:6] = -g0 * np.eye(3)
    a[3:6, 0:3] = (gains.alpha2 / g0) * np.eye(3)
    a[6:8, 3:6] = proj
    a[6:8, 6:8] = -gains.gamma * np.eye(2)
    return a


def quadratic_modes(gains: Gains) -> np.ndarray:
    """Roots of s^2 + a1 s + a2, computed without subtractive cancellation."""
    a1, a2 = gains.alpha1, gains.alpha2
    disc = a1 * a1 - 4.0 * a2
    if disc >= 0.0:
        r1 = 0.5 * (-a1 - np.sqrt(disc))
        r2 = a2 / r1
        return np.array([r1, r2], dtype=complex)
    s = 0.5 * np.sqrt(-disc)
    return np.array([-0.5 * a1 - 1j * s, -0.5 * a1 + 1j * s])


def char_poly_A2(gains: Gains, g0: float, lam: complex) -> complex:
    """Characteristic polynomial of the antipode linearization at lam:
    (lam^2 + a1 lam + a2)^3 * lam * (lam - gm)^2."""
    a1, a2, gm = gains.alpha1, gains.alpha2, gains.gamma
    q = lam * lam + a1 * lam + a2
    return q ** 3 * lam * (lam - gm) ** 2


def predicted_spectrum(identifier: str, gains: Gains) -> np.ndarray:
    """Closed-form eigenvalue multiset for A1, A2 or A3, sorted."""
    quad = quadratic_modes(gains)
    if identifier == "A1":
        eigs = np.repeat(quad, 3)
    elif identifier == "A2":
        eigs = np.concatenate([np.repeat(quad, 3),
                               [0.0, gains.gamma, gains.gamma]])
    elif identifier == "A3":
        eigs = np.concatenate([np.repeat(quad, 3),
                               [-gains.gamma, -gains.gamma]])
    else:
        raise ValueError(f"unknown matrix identifier {identifier!r}")
    return sort_spectrum(eigs)


def sort_spectrum(eigs: np.ndarray) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=complex)
    order = np.lexsort((eigs.imag, eigs.real))
    return eigs[order]


@dataclass(frozen=True)
class LinearizationReport:
    """Eigenstructure summary for one linearization matrix."""

    identifier: str
    matrix: np.ndarray
    eigenvalues: np.ndarray
    is_hurwitz: bool
    char_poly_residual: float

    def __post_init__(self):
        if len(self.eigenvalues) != self.matrix.shape[0]:
            raise ValueError("eigenvalue count must match matrix dimension")

    @property
    def spectral_abscissa(self) -> float:
        return float(self.eigenvalues.real.max())


def _predicted_char_poly(identifier: str, gains: Gains, lam: complex) -> complex:
    a1, a2, gm = gains.alpha1, gains.alpha2, gains.gamma
    q = lam * lam + a1 * lam + a2
    if identifier == "A1":
        return q ** 3
    if identifier == "A2":
        return q ** 3 * lam * (lam - gm) ** 2
    if identifier == "A3":
        return q ** 3 * (lam + gm) ** 2
    raise ValueError(f"unknown matrix identifier {identifier!r}")


_PROBE_POINTS = (1.0 + 1.0j, -2.5 + 0.4j, 0.3 - 1.2j, -0.7 - 0.9j, 2.0 + 0.0j)


def analyze_linearization(identifier: str, gains: Gains,
                          g0: float = GRAVITY) -> LinearizationReport:
    """Build one linearization, compute its spectrum numerically, and
    measure how far its characteristic polynomial is from the closed form."""
    if identifier == "A1":
        mat = build_A1(gains)
    elif identifier == "A2":
        mat = build_A2(gains, g0)
    elif identifier == "A3":
        mat = build_A3(gains, g0)
    else:
        raise ValueError(f"unknown matrix identifier {identifier!r}")
    eigs = sort_spectrum(np.linalg.eigvals(mat))
    resid = 0.0
    dim = mat.shape[0]
    for lam in _PROBE_POINTS:
        det = np.linalg.det(lam * np.eye(dim, dtype=complex) - mat)
        pred = _predicted_char_poly(identifier, gains, lam)
        resid = max(resid, abs(det - pred) / max(1.0, abs(pred)))
    return LinearizationReport(
        identifier=identifier,
        matrix=mat,
        eigenvalues=eigs,
        is_hurwitz=bool(eigs.real.max() < 0.0),
        char_poly_residual=float(resid),
    )


def all_linearization_reports(gains: Gains, g0: float = GRAVITY):
    return tuple(analyze_linearization(i, gains, g0) for i in ("A1", "A2", "A3"))


# ---------------------------------------------------------------------------
# convergence-rate measurement


def measure_convergence_rate(times, norms, window=None, floor=1e-12) -> float:
    """Least-squares exponential decay rate of an error-norm history.

    Fits log(norm) against time over the window (a (t0, t1) pair, default
    the whole record), excluding samples at or below the numerical floor.
    Returns the positive rate r such that norm ~ exp(-r t).
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    mask = norms > floor
    if window is not None:
        t0, t1 = window
        mask &= (times >= t0) & (times <= t1)
    if mask.sum() < 2:
        raise ValueError("fewer than two usable samples in fit window")
    slope = np.polyfit(times[mask], np.log(norms[mask]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# random sampling and batch sweeps


def sample_error_states(n: int, rng: np.random.Generator,
                        ball_radius: float = 5.0,
                        cap_radius: float = 1e-3) -> np.ndarray:
    """Sample n error states in the kernel's packed (9, n) layout.

    z1 and z2p are uniform in balls of the given radius; the sphere
    direction e_z - z2 is uniform outside a cap of angular radius
    cap_radius around the antipode -e_z.  The cap is excluded because the
    antipode's attracting set has measure zero yet trajectories starting
    arbitrarily close to it take arbitrarily long to leave.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < cap_radius < np.pi:
        raise ValueError("cap_radius must be in (0, pi)")
    out = np.empty((9, n))
    for row in (0, 3):
        d = rng.normal(size=(3, n))
        d /= np.linalg.norm(d, axis=0)
        r = ball_radius * rng.uniform(0.0, 1.0, size=n) ** (1.0 / 3.0)
        out[row:row + 3] = d * r
    cos_t = rng.uniform(-np.cos(cap_radius), 1.0, size=n)
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t ** 2))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=n)
    out[6] = sin_t * np.cos(phi)
    out[7] = sin_t * np.sin(phi)
    out[8] = cos_t
    return out


@dataclass(frozen=True)
class CertificateSweepResult:
    """Outcome of a batch Lyapunov-decrease check."""

    n_trajectories: int
    n_steps: int
    dt: float
    violations: int
    worst_rate_margin: float
    max_final_norm: float
    max_final_value: float
    elapsed_s: float

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.worst_rate_margin <= 1e-10


@dataclass(frozen=True)
class ConvergenceSweepResult:
    """Outcome of a batch convergence-to-origin check."""

    n_trajectories: int
    n_steps: int
    dt: float
    threshold: float
    n_converged: int
    worst_final_norm: float
    first_pass_times: np.ndarray = field(repr=False)
    elapsed_s: float = 0.0

    @property
    def all_converged(self) -> bool:
        return self.n_converged == self.n_trajectories


def certificate_sweep(gains: Gains, g0: float = GRAVITY, n: int = 10_000,
                      duration: float = 30.0, dt: float = 1e-4,
                      seed: int = 0, ball_radius: float = 5.0,
                      cap_radius: float = 1e-3,
                      norm_floor: float = 1e-9) -> CertificateSweepResult:
    """Integrate n random error trajectories checking, at every step, that
    V never increases (above the norm floor) and that its analytic
    derivative respects the quadratic bound."""
    gains.check_step_size(dt)
    rng = np.random.default_rng(seed)
    z = sample_error_states(n, rng, ball_radius, cap_radius)
    nsteps = int(round(duration / dt))
    viol = np.zeros(n, dtype=np.int64)
    margin = np.full(n, -np.inf)
    v_final = np.zeros(n)
    norm2_final = np.zeros(n)
    t0 = time.perf_counter()
    _kernels.error_batch_lyapunov(
        z, gains.alpha1, gains.alpha2, gains.gamma, g0, dt, nsteps,
        norm_floor * norm_floor, viol, margin, v_final, norm2_final,
    )
    elapsed = time.perf_counter() - t0
    return CertificateSweepResult(
        n_trajectories=n,
        n_steps=nsteps,
        dt=dt,
        violations=int(viol.sum()),
        worst_rate_margin=float(margin.max()),
        max_final_norm=float(np.sqrt(norm2_final.max())),
        max_final_value=float(v_final.max()),
        elapsed_s=elapsed,
    )


def convergence_sweep(gains: Gains, g0: float = GRAVITY, n: int = 1000,
                      duration: float = 60.0, dt: float = 1e-4,
                      threshold: float = 1e-6, seed: int = 0,
                      ball_radius: float = 5.0,
                      cap_radius: float = 1e-3) -> ConvergenceSweepResult:
    """Integrate n random error trajectories and report which of them reach
    the threshold norm within the duration."""
    gains.check_step_size(dt)
    rng = np.random.default_rng(seed)
    z = sample_error_states(n, rng, ball_radius, cap_radius)
    nsteps = int(round(duration / dt))
    first_pass = np.full(n, -1, dtype=np.int64)
    norm2_final = np.zeros(n)
    t0 = time.perf_counter()
    _kernels.error_batch_converge(
        z, gains.alpha1, gains.alpha2, gains.gamma, g0, dt, nsteps,
        threshold * threshold, first_pass, norm2_final,
    )
    elapsed = time.perf_counter() - t0
    times = np.where(first_pass >= 0, first_pass * dt, np.inf)
    return ConvergenceSweepResult(
        n_trajectories=n,
        n_steps=nsteps,
        dt=dt,
        threshold=threshold,
        n_converged=int((first_pass >= 0).sum()),
        worst_final_norm=float(np.sqrt(norm2_final.max())),
        first_pass_times=times,
        elapsed_s=elapsed,
    )


def trace_error_norm(xi0: ErrorState, gains: Gains, g0: float = GRAVITY,
                     duration: float = 60.0, dt: float = 1e-4,
                     save_every: int = 100):
    """Integrate one error trajectory; returns (times, norms, states) with
    states holding rows (z1, z2p, z2) at each saved sample."""
    gains.check_step_size(dt)
    nsteps = int(round(duration / dt))
    if nsteps % save_every:
        nsteps = (nsteps // save_every + 1) * save_every
    nsave = nsteps // save_every + 1
    norms = np.zeros(nsave)
    states = np.zeros((nsave, 9))
    z = xi0.packed()
    _kernels.error_single_trajectory(
        z, gains.alpha1, gains.alpha2, gains.gamma, g0, dt, save_every,
        norms, states,
    )
    times = np.arange(nsave) * (save_every * dt)
    return times, norms, states
