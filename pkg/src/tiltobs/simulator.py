"""Desk-scale rigid-body ground-truth generator.

A single floating box on viscoelastic corner contacts stands in for a
legged robot: it rocks on compliant feet, gets pushed, tips over and
falls, and carries an IMU at an offset from the center of mass.  That
preserves every effect the tilt observer is exercised against (contact
compliance, oscillation without a fixed pivot, anchor motion, impacts)
while keeping a 20 s run in the sub-second range through the compiled
substep kernel.

Frames: world z is up, ground is the z = 0 plane.  The body frame sits at
the center of mass; R maps body vectors to world vectors.  The IMU frame
is attached at a fixed (optionally scripted) offset inside the body.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .anchor import (
    AnchorState,
    AnchorTracker,
    KinematicSample,
    RotationDifferentiator,
    VectorDifferentiator,
    velocity_moving_anchor,
)
from .analysis import ErrorState, lyapunov_V
from .constants import GRAVITY
from .geometry import check_rotation, rot_z, skew, so3_exp
from .observer import Gains, ImuSample, ObserverState, observer_step, tilt_error_angle
from .trajlog import COLUMNS, LOG_VERSION, TrajectoryLog

_EZ = np.array([0.0, 0.0, 1.0])


class SimulationDivergedError(RuntimeError):
    """The rigid-body state went non-finite."""

    def __init__(self, t: float):
        super().__init__(f"simulation diverged at t = {t:.6f} s")
        self.t = t


def _vec3(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector")
    return v


@dataclass(frozen=True)
class RigidBodyState:
    """Pose and twist: world position/velocity, body-frame angular rate."""

    pos: np.ndarray
    rot: np.ndarray
    vel: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pos", _vec3(self.pos, "pos"))
        object.__setattr__(self, "vel", _vec3(self.vel, "vel"))
        object.__setattr__(self, "omega", _vec3(self.omega, "omega"))
        rot = np.asarray(self.rot, dtype=float)
        check_rotation(rot, "rot")
        object.__setattr__(self, "rot", rot)
        for name in ("pos", "rot", "vel", "omega"):
            if not np.isfinite(getattr(self, name)).all():
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class ContactModel:
    """Viscoelastic point contacts at fixed body-frame corner offsets.

    Normal force per penetrating corner is stiffness*depth plus damping
    times the approach speed, clamped so contacts never pull.  Horizontal
    no-slip is enforced by stiff tangential springs anchored where each
    corner first touches; the anchors live in the stepping state, not
    here.
    """

    stiffness: float = 1e5
    damping: float = 1e3
    corners: np.ndarray = None
    tangential_stiffness: float = None
    tangential_damping: float = None

    def __post_init__(self):
        if self.stiffness <= 0.0:
            raise ValueError("stiffness must be positive")
        if self.damping < 0.0:
            raise ValueError("damping must be nonnegative")
        if self.corners is None:
            object.__setattr__(self, "corners", default_corner_layout())
        corners = np.asarray(self.corners, dtype=float)
        if corners.ndim != 2 or corners.shape[1] != 3 or corners.shape[0] < 1:
            raise ValueError("corners must be an (n, 3) array")
        object.__setattr__(self, "corners", corners)
        if self.tangential_stiffness is None:
            object.__setattr__(self, "tangential_stiffness", self.stiffness)
        if self.tangential_damping is None:
            object.__setattr__(self, "tangential_damping", self.damping)
        if self.tangential_stiffness <= 0.0 or self.tangential_damping < 0.0:
            raise ValueError("tangential parameters out of range")


def default_corner_layout(com_height: float = 0.5,
                          half_extents=(0.10, 0.15, 0.50)) -> np.ndarray:
    """Two rectangular feet (8 corners) plus the 4 top corners of the box.

    The feet are 0.22 m long (x) by 0.10 m wide, centered 0.095 m either
    side of the midline; the top corners let a toppled body come to rest
    instead of falling through its own unmodeled geometry.
    """
    pts = []
    for y_center in (0.095, -0.095):
        for x in (0.11, -0.11):
            for y in (y_center + 0.05, y_center - 0.05):
                pts.append((x, y, -com_height))
    hx, hy, hz = half_extents
    for x in (hx, -hx):
        for y in (hy, -hy):
            pts.append((x, y, hz))
    return np.array(pts)


@dataclass(frozen=True)
class PushEvent:
    """A constant world-frame force applied at a body-frame point."""

    t_start: float
    duration: float
    force: np.ndarray
    point: np.ndarray = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        object.__setattr__(self, "force", _vec3(self.force, "force"))
        object.__setattr__(self, "point", _vec3(self.point, "point"))

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_start + self.duration


@dataclass(frozen=True)
class ImuNoiseModel:
    """Per-axis Gaussian measurement noise, reproducible from the seed."""

    gyro_sd: float = 0.02
    accel_sd: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.gyro_sd < 0.0 or self.accel_sd < 0.0:
            raise ValueError("noise standard deviations must be nonnegative")


@dataclass(frozen=True)
class ImuOffset:
    """IMU mounting: body-frame position, orientation, optional scripted
    sinusoidal translation emulating upper-body joint motion."""

    pos: np.ndarray = (0.0, 0.0, 0.3)
    rot: np.ndarray = None
    motion_amplitude: np.ndarray = (0.0, 0.0, 0.0)
    motion_hz: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "pos", _vec3(self.pos, "pos"))
        object.__setattr__(
            self, "motion_amplitude", _vec3(self.motion_amplitude, "motion_amplitude")
        )
        rot = np.eye(3) if self.rot is None else np.asarray(self.rot, dtype=float)
        check_rotation(rot, "rot")
        object.__setattr__(self, "rot", rot)
        if self.motion_hz <= 0.0:
            raise ValueError("motion_hz must be positive")

    def pos_at(self, t: float) -> np.ndarray:
        w = 2.0 * np.pi * self.motion_hz
        return self.pos + self.motion_amplitude * np.sin(w * t)

    def vel_at(self, t: float) -> np.ndarray:
        w = 2.0 * np.pi * self.motion_hz
        return self.motion_amplitude * w * np.cos(w * t)

    def acc_at(self, t: float) -> np.ndarray:
        w = 2.0 * np.pi * self.motion_hz
        return -self.motion_amplitude * w * w * np.sin(w * t)


def standing_state(mass: float, contact: ContactModel,
                   g0: float = GRAVITY) -> RigidBodyState:
    """Level rest pose with the static contact penetration already applied,
    so a run starts in force balance instead of with a settling thud."""
    feet = contact.corners[contact.corners[:, 2] < 0.0]
    if len(feet) == 0:
        raise ValueError("contact layout has no foot corners")
    height = -feet[:, 2].max()
    delta = mass * g0 / (len(feet) * contact.stiffness)
    return RigidBodyState(
        pos=np.array([0.0, 0.0, height - delta]),
        rot=np.eye(3),
        vel=np.zeros(3),
        omega=np.zeros(3),
    )


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs; all fields have benchmark defaults."""

    mass: float = 42.6
    inertia: np.ndarray = (3.87, 3.69, 0.46)
    contact: ContactModel = field(default_factory=ContactModel)
    pushes: tuple = (
        PushEvent(4.0, 0.1, (100.0, 0.0, 0.0), (0.0, 0.0, 0.3)),
        PushEvent(14.0, 0.1, (300.0, 0.0, 0.0), (0.0, 0.0, 0.3)),
    )
    noise: ImuNoiseModel = field(default_factory=ImuNoiseModel)
    gains: Gains = field(default_factory=lambda: Gains(100.0, 20.0, 3.0))
    imu: ImuOffset = field(default_factory=ImuOffset)
    initial_state: RigidBodyState = None
    duration: float = 20.0
    dt_sim: float = 1e-5
    dt_control: float = 1e-3
    g0: float = GRAVITY
    tilt_error_rad: float = 0.2
    tilt_error_axis: np.ndarray = (1.0, 0.0, 0.0)
    tilt_free_init: str = "align"
    align_duration: float = 0.25
    anchor_cutoff_hz: float = 50.0

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        inertia = _vec3(self.inertia, "inertia")
        if (inertia <= 0.0).any():
            raise ValueError("inertia entries must be positive")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(
            self, "tilt_error_axis", _vec3(self.tilt_error_axis, "tilt_error_axis")
        )
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if not 0.0 < self.dt_sim <= self.dt_control:
            raise ValueError("need 0 < dt_sim <= dt_control")
        ratio = self.dt_control / self.dt_sim
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("dt_control must be an integer multiple of dt_sim")
        if self.tilt_free_init not in ("align", "guess"):
            raise ValueError("tilt_free_init must be 'align' or 'guess'")
        if self.align_duration < 0.0:
            raise ValueError("align_duration must be nonnegative")
        if self.initial_state is None:
            object.__setattr__(
                self, "initial_state", standing_state(self.mass, self.contact, self.g0)
            )
        self.gains.check_step_size(self.dt_control)

    @property
    def substeps(self) -> int:
        return int(round(self.dt_control / self.dt_sim))

    @property
    def ticks(self) -> int:
        return int(round(self.duration / self.dt_control))

    def fingerprint(self) -> str:
        """Stable hash of every physically meaningful field."""
        h = hashlib.sha256()
        parts = [
            self.mass, self.inertia, self.contact.stiffness, self.contact.damping,
            self.contact.tangential_stiffness, self.contact.tangential_damping,
            self.contact.corners,
            [(p.t_start, p.duration, p.force, p.point) for p in self.pushes],
            (self.noise.gyro_sd, self.noise.accel_sd, self.noise.seed),
            (self.gains.alpha1, self.gains.alpha2, self.gains.gamma),
            self.imu.pos, self.imu.rot, self.imu.motion_amplitude, self.imu.motion_hz,
            self.initial_state.pos, self.initial_state.rot,
            self.initial_state.vel, self.initial_state.omega,
            (self.duration, self.dt_sim, self.dt_control, self.g0),
            (self.tilt_error_rad, self.tilt_error_axis, self.tilt_free_init,
             self.align_duration, self.anchor_cutoff_hz),
        ]

        def feed(obj):
            if isinstance(obj, np.ndarray):
                h.update(obj.tobytes())
            elif isinstance(obj, (list, tuple)):
                for item in obj:
                    feed(item)
            else:
                h.update(repr(obj).encode())

        feed(parts)
        return h.hexdigest()[:16]


# ---------------------------------------------------------------------------
# pure reference implementations (the kernel is the fast route; tests pin
# the two against each other)


def contact_forces(state: RigidBodyState, model: ContactModel):
    """Per-corner contact forces at a state, ignoring tangential springs.

    Returns (forces (n,3), corners_world (n,3), zmp).  Normal components
    are exact; tangential entries are zero because the no-slip springs
    depend on stepping history.  zmp is the normal-force-weighted mean of
    the contact points projected to the ground plane, or None in flight.
    """
    n = len(model.corners)
    forces = np.zeros((n, 3))
    world = state.pos + model.corners @ state.rot.T
    vel = state.vel + (skew(state.omega) @ model.corners.T).T @ state.rot.T
    below = world[:, 2] < 0.0
    approach = np.where(vel[:, 2] < 0.0, -vel[:, 2], 0.0)
    forces[below, 2] = (
        model.stiffness * (-world[below, 2]) + model.damping * approach[below]
    )
    total = forces[:, 2].sum()
    if total <= 0.0:
        return forces, world, None
    zmp = (forces[:, 2] @ world) / total
    zmp[2] = 0.0
    return forces, world, zmp


def dynamics_step(state: RigidBodyState, model: ContactModel, mass: float,
                  inertia: np.ndarray, pushes, t: float, dt: float,
                  anchors: np.ndarray, active: np.ndarray,
                  g0: float = GRAVITY) -> RigidBodyState:
    """One semi-implicit substep, plain numpy; mutates the anchor arrays.

    Reference implementation for tests and inspection; run_scenario uses
    the compiled kernel, which must match this to rounding.
    """
    corners = model.corners
    world = state.pos + corners @ state.rot.T
    velc = state.vel + (skew(state.omega) @ corners.T).T @ state.rot.T
    force = np.zeros(3)
    torque = np.zeros(3)
    for i in range(len(corners)):
        if world[i, 2] < 0.0:
            fz = model.stiffness * (-world[i, 2])
            if velc[i, 2] < 0.0:
                fz -= model.damping * velc[i, 2]
            if not active[i]:
                anchors[i, :2] = world[i, :2]
                active[i] = 1
                ft = -model.tangential_damping * velc[i, :2]
            else:
                ft = (
                    -model.tangential_stiffness * (world[i, :2] - anchors[i, :2])
                    - model.tangential_damping * velc[i, :2]
                )
            f = np.array([ft[0], ft[1], fz])
            force += f
            torque += np.cross(world[i] - state.pos, f)
        else:
            active[i] = 0
    for push in pushes:
        if push.active(t):
            force += push.force
            torque += np.cross(state.rot @ push.point, push.force)
    torque_body = state.rot.T @ torque
    inert_omega = inertia * state.omega
    omega_dot = (torque_body - np.cross(state.omega, inert_omega)) / inertia
    vel = state.vel + dt * (force / mass - g0 * _EZ)
    omega = state.omega + dt * omega_dot
    pos = state.pos + dt * vel
    phi = omega * dt
    ang = np.linalg.norm(phi)
    if ang < 1e-8:
        sa, sb = 1.0 - ang * ang / 6.0, 0.5 - ang * ang / 24.0
    else:
        sa, sb = np.sin(ang) / ang, (1.0 - np.cos(ang)) / (ang * ang)
    sph = skew(phi)
    rot = state.rot @ (np.eye(3) + sa * sph + sb * sph @ sph)
    if not (np.isfinite(pos).all() and np.isfinite(vel).all()
            and np.isfinite(omega).all()):
        raise SimulationDivergedError(t)
    return RigidBodyState(pos=pos, rot=rot, vel=vel, omega=omega)


def mechanical_energy(state: RigidBodyState, model: ContactModel, mass: float,
                      inertia: np.ndarray, anchors: np.ndarray,
                      active: np.ndarray, g0: float = GRAVITY) -> float:
    """Kinetic + gravitational + contact-spring energy; with nonnegative
    damping and no pushes this is non-increasing along the flow."""
    kinetic = 0.5 * mass * state.vel @ state.vel
    kinetic += 0.5 * state.omega @ (np.asarray(inertia) * state.omega)
    potential = mass * g0 * state.pos[2]
    world = state.pos + model.corners @ state.rot.T
    spring = 0.0
    for i in range(len(model.corners)):
        if world[i, 2] < 0.0:
            spring += 0.5 * model.stiffness * world[i, 2] ** 2
            if active[i]:
                d = world[i, :2] - anchors[i, :2]
                spring += 0.5 * model.tangential_stiffness * d @ d
    return float(kinetic + potential + spring)


def imu_measure(state: RigidBodyState, accel_world: np.ndarray,
                alpha_body: np.ndarray, imu: ImuOffset, t: float,
                g0: float = GRAVITY, gyro_noise=None, accel_noise=None) -> ImuSample:
    """Gyro and accelerometer readings at the IMU mount.

    accel_world/alpha_body are the body's current linear (world frame,
    gravity included) and angular (body frame) accelerations.  The rigid
    lever arm and any scripted mount motion feed the accelerometer; noise
    vectors are added as given so streams stay reproducible.
    """
    r = imu.pos_at(t)
    omega = state.omega
    acc_imu_world = accel_world + state.rot @ (
        np.cross(alpha_body, r)
        + np.cross(omega, np.cross(omega, r))
        + 2.0 * np.cross(omega, imu.vel_at(t))
        + imu.acc_at(t)
    )
    rot_imu = state.rot @ imu.rot
    y_g = imu.rot.T @ omega
    y_a = rot_imu.T @ (acc_imu_world + g0 * _EZ)
    if gyro_noise is not None:
        y_g = y_g + gyro_noise
    if accel_noise is not None:
        y_a = y_a + accel_noise
    return ImuSample(gyro=y_g, accel=y_a, t=t)


def robust_yaw(rot: np.ndarray, previous: float = 0.0) -> float:
    """Heading angle of a rotation, holding the previous value through the
    pitch singularity where heading is numerically meaningless."""
    if abs(rot[2, 0]) > 0.999:
        return previous
    return float(np.arctan2(rot[1, 0], rot[0, 0]))


def kinematic_measure(state: RigidBodyState, imu: ImuOffset,
                      anchor_world: np.ndarray, t: float,
                      previous_yaw: float = 0.0):
    """Encoder-equivalent pose of the IMU relative to the contact anchor.

    Splits the true body attitude into heading times contact rotation,
    R = R_c * Rz(yaw): the kinematic chain reports the IMU pose in the
    contact-aligned frame (origin at the anchor, believed level), which
    differs from the true world pose by exactly R_c.  Returns
    (pos_c, rot_c_imu, contact_rot, yaw).
    """
    yaw = robust_yaw(state.rot, previous_yaw)
    rz = rot_z(yaw)
    contact_rot = state.rot @ rz.T
    rot_c_imu = rz @ imu.rot
    anchor_body = state.rot.T @ (anchor_world - state.pos)
    pos_c = rz @ (imu.pos_at(t) - anchor_body)
    return pos_c, rot_c_imu, contact_rot, yaw


# ---------------------------------------------------------------------------
# scenario runner


@dataclass
class SimulationResult:
    """A run's log plus ground-truth arrays tests and reports draw on."""

    scenario: Scenario
    log: TrajectoryLog
    times: np.ndarray
    truth_tilt: np.ndarray
    truth_vel: np.ndarray
    err_full: np.ndarray
    err_intermediate: np.ndarray
    tilt_free_norm: np.ndarray
    rot_imu: np.ndarray
    rot_contact: np.ndarray
    rot_c_imu: np.ndarray
    zmp: np.ndarray
    in_contact: np.ndarray
    lyapunov: np.ndarray


def run_scenario(scenario: Scenario) -> SimulationResult:
    """Simulate a scenario with the observer in the loop.

    Physics advances at dt_sim through the compiled kernel; measurements,
    the observer, and the log advance at dt_control.  All randomness comes
    from the scenario's noise seed, so identical scenarios produce
    bit-identical results.
    """
    sc = scenario
    n_ticks = sc.ticks
    n_rows = n_ticks + 1
    corners = sc.contact.corners
    n_corners = len(corners)

    rng = np.random.default_rng(sc.noise.seed)
    gyro_noise = rng.normal(0.0, 1.0, (n_rows, 3)) * sc.noise.gyro_sd
    accel_noise = rng.normal(0.0, 1.0, (n_rows, 3)) * sc.noise.accel_sd

    pos = sc.initial_state.pos.copy()
    rot = sc.initial_state.rot.copy()
    vel = sc.initial_state.vel.copy()
    omega = sc.initial_state.omega.copy()
    anchors = np.zeros((n_corners, 3))
    active = np.zeros(n_corners, dtype=np.uint8)
    forces = np.zeros((n_corners, 3))
    corners_world = np.zeros((n_corners, 3))
    accel_out = np.zeros(6)

    pos_diff = VectorDifferentiator()
    rot_diff = RotationDifferentiator()
    tracker = AnchorTracker(cutoff_hz=sc.anchor_cutoff_hz)

    data = np.zeros((n_rows, len(COLUMNS)))
    truth_tilt = np.zeros((n_rows, 3))
    truth_vel = np.zeros((n_rows, 3))
    err_full = np.zeros(n_rows)
    err_intermediate = np.zeros(n_rows)
    tilt_free_norm = np.zeros(n_rows)
    rot_imu_log = np.zeros((n_rows, 3, 3))
    rot_contact_log = np.zeros((n_rows, 3, 3))
    rot_c_imu_log = np.zeros((n_rows, 3, 3))
    zmp_log = np.full((n_rows, 3), np.nan)
    in_contact = np.zeros(n_rows, dtype=bool)
    lyap = np.zeros(n_rows)

    observer = None
    yaw = 0.0
    align_sum = np.zeros(3)
    align_ticks = max(0, int(round(sc.align_duration / sc.dt_control)))
    no_push = np.zeros(3)

    for k in range(n_rows):
        t = k * sc.dt_control
        if k == 0:
            status = _kernels.rigid_substeps(
                pos, rot, vel, omega, corners, anchors, active,
                sc.mass, sc.inertia, sc.contact.stiffness, sc.contact.damping,
                sc.contact.tangential_stiffness, sc.contact.tangential_damping,
                sc.g0, no_push, no_push, sc.dt_sim, 0,
                forces, corners_world, accel_out,
            )
        else:
            t_prev = (k - 1) * sc.dt_control
            push_f = np.zeros(3)
            push_pt = np.zeros(3)
            for push in sc.pushes:
                if push.active(t_prev):
                    push_f = push.force
                    push_pt = push.point
                    break
            status = _kernels.rigid_substeps(
                pos, rot, vel, omega, corners, anchors, active,
                sc.mass, sc.inertia, sc.contact.stiffness, sc.contact.damping,
                sc.contact.tangential_stiffness, sc.contact.tangential_damping,
                sc.g0, push_f, push_pt, sc.dt_sim, sc.substeps,
                forces, corners_world, accel_out,
            )
        if status != 0:
            raise SimulationDivergedError(t)

        state = RigidBodyState(pos=pos.copy(), rot=rot.copy(),
                               vel=vel.copy(), omega=omega.copy())
        sample = imu_measure(
            state, accel_out[:3], accel_out[3:], sc.imu, t, sc.g0,
            gyro_noise[k], accel_noise[k],
        )

        total_normal = forces[:, 2].sum()
        contact_now = total_normal > 0.0
        if contact_now:
            zmp = (forces[:, 2] @ corners_world) / total_normal
            zmp = np.array([zmp[0], zmp[1], 0.0])
        else:
            zmp = None
        anchor = tracker.update(zmp, t)

        pos_c, rot_c_imu, contact_rot, yaw = kinematic_measure(
            state, sc.imu, anchor.pos, t, yaw
        )
        kin = KinematicSample(
            pos=pos_c,
            pos_rate=pos_diff.update(pos_c, t),
            rot=rot_c_imu,
            rot_rate=rot_diff.update(rot_c_imu, t),
            t=t,
        )
        vel_anchor_c = contact_rot.T @ anchor.vel
        y_v = velocity_moving_anchor(
            kin,
            AnchorState(pos=np.zeros(3), vel=vel_anchor_c,
                        in_contact=anchor.in_contact),
            sample.gyro,
        )
        sample_v = np.asarray(y_v, dtype=float)

        rot_imu = state.rot @ sc.imu.rot
        tilt_true = rot_imu.T @ _EZ
        vel_imu_world = state.vel + state.rot @ (
            np.cross(state.omega, sc.imu.pos_at(t)) + sc.imu.vel_at(t)
        )
        vel_true = rot_imu.T @ vel_imu_world

        if observer is None:
            err_rot = _tilt_error_rotation(sc)
            tilt_guess = err_rot @ tilt_true
            if sc.tilt_free_init == "align":
                align_sum = sample.accel.copy()
                tilt_free0 = align_sum / np.linalg.norm(align_sum)
            else:
                tilt_free0 = tilt_guess
            observer = ObserverState(
                velocity=sample_v, tilt_free=tilt_free0, tilt=tilt_guess
            )
        else:
            observer = observer_step(
                observer, sample, sample_v, sc.gains, sc.dt_control, sc.g0
            )
            if sc.tilt_free_init == "align" and k <= align_ticks:
                align_sum += sample.accel
                observer = replace(
                    observer, tilt_free=align_sum / np.linalg.norm(align_sum)
                )

        err_angle = tilt_error_angle(observer.tilt, tilt_true)
        free_dir = observer.tilt_free / np.linalg.norm(observer.tilt_free)
        xi = ErrorState(
            z1=rot_imu @ (vel_true - observer.velocity),
            z2p=rot_imu @ (tilt_true - observer.tilt_free),
            z2=rot_imu @ (tilt_true - observer.tilt),
        )
        v_now = lyapunov_V(xi, sc.gains, sc.g0)

        row = data[k]
        row[0] = t
        row[1:4] = tilt_true
        row[4:7] = sample.gyro
        row[7:10] = sample.accel
        row[10:13] = sample_v
        row[13:16] = observer.velocity
        row[16:19] = observer.tilt_free
        row[19:22] = observer.tilt
        row[22] = err_angle
        row[23] = v_now

        truth_tilt[k] = tilt_true
        truth_vel[k] = vel_true
        err_full[k] = err_angle
        err_intermediate[k] = tilt_error_angle(free_dir, tilt_true)
        tilt_free_norm[k] = np.linalg.norm(observer.tilt_free)
        rot_imu_log[k] = rot_imu
        rot_contact_log[k] = contact_rot
        rot_c_imu_log[k] = rot_c_imu
        if zmp is not None:
            zmp_log[k] = zmp
        in_contact[k] = contact_now
        lyap[k] = v_now

    metadata = {
        "log_version": LOG_VERSION,
        "scenario": sc.fingerprint(),
        "gains": f"{sc.gains.alpha1:g},{sc.gains.alpha2:g},{sc.gains.gamma:g}",
        "seed": str(sc.noise.seed),
        "noise_sd": f"{sc.noise.gyro_sd:g},{sc.noise.accel_sd:g}",
        "dt_control": f"{sc.dt_control:g}",
    }
    return SimulationResult(
        scenario=sc,
        log=TrajectoryLog(metadata=metadata, data=data),
        times=data[:, 0].copy(),
        truth_tilt=truth_tilt,
        truth_vel=truth_vel,
        err_full=err_full,
        err_intermediate=err_intermediate,
        tilt_free_norm=tilt_free_norm,
        rot_imu=rot_imu_log,
        rot_contact=rot_contact_log,
        rot_c_imu=rot_c_imu_log,
        zmp=zmp_log,
        in_contact=in_contact,
        lyapunov=lyap,
    )


def _tilt_error_rotation(sc: Scenario) -> np.ndarray:
    axis = sc.tilt_error_axis / np.linalg.norm(sc.tilt_error_axis)
    return so3_exp(sc.tilt_error_rad * axis)
