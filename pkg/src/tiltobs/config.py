"""INI-style run configuration.

An empty file (or no file) yields the standard benchmark scenario; every
key below overrides one field.  Unknown sections or keys are rejected
rather than ignored so typos cannot silently change a run.  See the
README for the full key table.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .observer import Gains
from .simulator import (
    ContactModel,
    ImuNoiseModel,
    ImuOffset,
    PushEvent,
    Scenario,
    default_corner_layout,
    standing_state,
)


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


_KNOWN_KEYS = {
    "run": {"duration", "dt_sim", "dt_control", "log_cadence_hz", "output",
            "pushes"},
    "gains": {"alpha1", "alpha2", "gamma"},
    "gravity": {"g0"},
    "noise": {"gyro_sd", "accel_sd", "seed"},
    "body": {"mass", "inertia", "com_height", "imu_pos",
             "imu_motion_amplitude", "imu_motion_hz"},
    "contact": {"stiffness", "damping", "tangential_stiffness",
                "tangential_damping", "anchor_cutoff_hz"},
    "observer": {"tilt_error_rad", "tilt_error_axis", "tilt_free_init",
                 "align_duration"},
    "verify": {"checks", "lyapunov_samples", "lyapunov_duration",
               "sweep_samples", "sweep_duration", "sweep_ball_radius",
               "ball_radius", "cap_radius", "dt", "threshold", "norm_floor",
               "seed"},
}

_VALID_CHECKS = ("eigen", "lyapunov", "sweep")


@dataclass(frozen=True)
class VerifyConfig:
    """Parameters for the certificate verifications the CLI can run."""

    checks: tuple = _VALID_CHECKS
    lyapunov_samples: int = 10_000
    lyapunov_duration: float = 30.0
    sweep_samples: int = 1000
    sweep_duration: float = 60.0
    sweep_ball_radius: float = 0.0
    ball_radius: float = 5.0
    cap_radius: float = 1e-3
    dt: float = 1e-4
    threshold: float = 1e-6
    norm_floor: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        for name in self.checks:
            if name not in _VALID_CHECKS:
                raise ConfigError(
                    f"unknown verification {name!r}; choose from "
                    f"{', '.join(_VALID_CHECKS)} or all"
                )
        if self.lyapunov_samples < 1 or self.sweep_samples < 1:
            raise ConfigError("verification sample counts must be positive")
        if self.dt <= 0.0 or self.lyapunov_duration <= 0.0 \
                or self.sweep_duration <= 0.0:
            raise ConfigError("verification durations and dt must be positive")


@dataclass(frozen=True)
class RunConfig:
    """A validated scenario plus output and verification settings."""

    scenario: Scenario = field(default_factory=Scenario)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: str = "out"
    log_cadence_hz: float = 1000.0

    def __post_init__(self):
        if self.log_cadence_hz <= 0.0:
            raise ConfigError("log_cadence_hz must be positive")

    def equals(self, other: "RunConfig") -> bool:
        """Structural equality (array fields make plain == unusable)."""
        return (
            self.scenario.fingerprint() == other.scenario.fingerprint()
            and self.verify == other.verify
            and self.output == other.output
            and self.log_cadence_hz == other.log_cadence_hz
        )


def _get(parser, section, key, cast, default, errors: list):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        return cast(raw)
    except (ValueError, ConfigError) as exc:
        errors.append(f"[{section}] {key} = {raw!r}: {exc}")
        return default


def _vector(raw: str) -> np.ndarray:
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ValueError("expected three numbers")
    return np.array([float(p) for p in parts])


def _checks(raw: str) -> tuple:
    names = [p for p in raw.replace(",", " ").split() if p]
    if names == ["all"]:
        return _VALID_CHECKS
    for name in names:
        if name not in _VALID_CHECKS:
            raise ValueError(
                f"unknown verification {name!r}; choose from "
                f"{', '.join(_VALID_CHECKS)} or all"
            )
    return tuple(names)


def parse_config(text: str) -> RunConfig:
    """Parse configuration text into a validated RunConfig."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    errors: list = []
    for section in parser.sections():
        base = "push" if section.startswith("push.") else section
        if base == "push":
            known = {"t_start", "duration", "force", "point"}
        elif base in _KNOWN_KEYS:
            known = _KNOWN_KEYS[base]
        else:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser.options(section):
            if key not in known:
                errors.append(f"unknown key {key!r} in section [{section}]")
    if errors:
        raise ConfigError("; ".join(errors))

    g = lambda s, k, cast, d: _get(parser, s, k, cast, d, errors)

    g0 = g("gravity", "g0", float, 9.81)
    try:
        gains = Gains(
            g("gains", "alpha1", float, 100.0),
            g("gains", "alpha2", float, 20.0),
            g("gains", "gamma", float, 3.0),
        )
    except ValueError as exc:
        raise ConfigError(f"[gains]: {exc}") from exc

    noise = ImuNoiseModel(
        gyro_sd=g("noise", "gyro_sd", float, 0.02),
        accel_sd=g("noise", "accel_sd", float, 0.5),
        seed=g("noise", "seed", int, 0),
    )

    com_height = g("body", "com_height", float, 0.5)
    try:
        contact = ContactModel(
            stiffness=g("contact", "stiffness", float, 1e5),
            damping=g("contact", "damping", float, 1e3),
            corners=default_corner_layout(com_height),
            tangential_stiffness=g("contact", "tangential_stiffness", float, None),
            tangential_damping=g("contact", "tangential_damping", float, None),
        )
        imu = ImuOffset(
            pos=g("body", "imu_pos", _vector, np.array([0.0, 0.0, 0.3])),
            motion_amplitude=g("body", "imu_motion_amplitude", _vector,
                               np.zeros(3)),
            motion_hz=g("body", "imu_motion_hz", float, 0.5),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    pushes_mode = g("run", "pushes", str, "default").strip().lower()
    push_sections = sorted(s for s in parser.sections() if s.startswith("push."))
    if push_sections:
        pushes = []
        for section in push_sections:
            try:
                pushes.append(PushEvent(
                    t_start=_get(parser, section, "t_start", float, 0.0, errors),
                    duration=_get(parser, section, "duration", float, 0.1, errors),
                    force=_get(parser, section, "force", _vector,
                               np.zeros(3), errors),
                    point=_get(parser, section, "point", _vector,
                               np.zeros(3), errors),
                ))
            except ValueError as exc:
                raise ConfigError(f"[{section}]: {exc}") from exc
        pushes = tuple(pushes)
    elif pushes_mode == "none":
        pushes = ()
    elif pushes_mode == "default":
        pushes = Scenario.__dataclass_fields__["pushes"].default
    else:
        raise ConfigError(
            f"[run] pushes = {pushes_mode!r}: expected 'default' or 'none'"
        )

    mass = g("body", "mass", float, 42.6)
    try:
        scenario = Scenario(
            mass=mass,
            inertia=g("body", "inertia", _vector, np.array([3.87, 3.69, 0.46])),
            contact=contact,
            pushes=pushes,
            noise=noise,
            gains=gains,
            imu=imu,
            initial_state=standing_state(mass, contact, g0),
            duration=g("run", "duration", float, 20.0),
            dt_sim=g("run", "dt_sim", float, 1e-5),
            dt_control=g("run", "dt_control", float, 1e-3),
            g0=g0,
            tilt_error_rad=g("observer", "tilt_error_rad", float, 0.2),
            tilt_error_axis=g("observer", "tilt_error_axis", _vector,
                              np.array([1.0, 0.0, 0.0])),
            tilt_free_init=g("observer", "tilt_free_init", str, "align"),
            align_duration=g("observer", "align_duration", float, 0.25),
            anchor_cutoff_hz=g("contact", "anchor_cutoff_hz", float, 50.0),
        )
        verify = VerifyConfig(
            checks=g("verify", "checks", _checks, _VALID_CHECKS),
            lyapunov_samples=g("verify", "lyapunov_samples", int, 10_000),
            lyapunov_duration=g("verify", "lyapunov_duration", float, 30.0),
            sweep_samples=g("verify", "sweep_samples", int, 1000),
            sweep_duration=g("verify", "sweep_duration", float, 60.0),
            sweep_ball_radius=g("verify", "sweep_ball_radius", float, 0.0),
            ball_radius=g("verify", "ball_radius", float, 5.0),
            cap_radius=g("verify", "cap_radius", float, 1e-3),
            dt=g("verify", "dt", float, 1e-4),
            threshold=g("verify", "threshold", float, 1e-6),
            norm_floor=g("verify", "norm_floor", float, 1e-9),
            seed=g("verify", "seed", int, 0),
        )
        config = RunConfig(
            scenario=scenario,
            verify=verify,
            output=g("run", "output", str, "out"),
            log_cadence_hz=g("run", "log_cadence_hz", float, 1000.0),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def load_config(path) -> RunConfig:
    """Read and validate a configuration file."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def serialize_config(config: RunConfig) -> str:
    """Render a RunConfig as configuration text that reparses equal."""
    sc = config.scenario

    def fmt(v) -> str:
        if isinstance(v, np.ndarray):
            return ", ".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(float(v))
        return str(v)

    parser = configparser.ConfigParser(interpolation=None)
    parser["run"] = {
        "duration": fmt(sc.duration),
        "dt_sim": fmt(sc.dt_sim),
        "dt_control": fmt(sc.dt_control),
        "log_cadence_hz": fmt(config.log_cadence_hz),
        "output": config.output,
    }
    if not sc.pushes:
        parser["run"]["pushes"] = "none"
    parser["gains"] = {
        "alpha1": fmt(sc.gains.alpha1),
        "alpha2": fmt(sc.gains.alpha2),
        "gamma": fmt(sc.gains.gamma),
    }
    parser["gravity"] = {"g0": fmt(sc.g0)}
    parser["noise"] = {
        "gyro_sd": fmt(sc.noise.gyro_sd),
        "accel_sd": fmt(sc.noise.accel_sd),
        "seed": str(sc.noise.seed),
    }
    com_height = -sc.contact.corners[:, 2].min()
    parser["body"] = {
        "mass": fmt(sc.mass),
        "inertia": fmt(sc.inertia),
        "com_height": fmt(com_height),
        "imu_pos": fmt(sc.imu.pos),
        "imu_motion_amplitude": fmt(sc.imu.motion_amplitude),
        "imu_motion_hz": fmt(sc.imu.motion_hz),
    }
    parser["contact"] = {
        "stiffness": fmt(sc.contact.stiffness),
        "damping": fmt(sc.contact.damping),
        "tangential_stiffness": fmt(sc.contact.tangential_stiffness),
        "tangential_damping": fmt(sc.contact.tangential_damping),
        "anchor_cutoff_hz": fmt(sc.anchor_cutoff_hz),
    }
    parser["observer"] = {
        "tilt_error_rad": fmt(sc.tilt_error_rad),
        "tilt_error_axis": fmt(sc.tilt_error_axis),
        "tilt_free_init": sc.tilt_free_init,
        "align_duration": fmt(sc.align_duration),
    }
    for i, push in enumerate(sc.pushes, start=1):
        parser[f"push.{i}"] = {
            "t_start": fmt(push.t_start),
            "duration": fmt(push.duration),
            "force": fmt(push.force),
            "point": fmt(push.point),
        }
    v = config.verify
    parser["verify"] = {
        "checks": " ".join(v.checks),
        "lyapunov_samples": str(v.lyapunov_samples),
        "lyapunov_duration": fmt(v.lyapunov_duration),
        "sweep_samples": str(v.sweep_samples),
        "sweep_duration": fmt(v.sweep_duration),
        "sweep_ball_radius": fmt(v.sweep_ball_radius),
        "ball_radius": fmt(v.ball_radius),
        "cap_radius": fmt(v.cap_radius),
        "dt": fmt(v.dt),
        "threshold": fmt(v.threshold),
        "norm_floor": fmt(v.norm_floor),
        "seed": str(v.seed),
    }
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def with_seed(config: RunConfig, seed: int) -> RunConfig:
    """A copy of the config with the scenario noise seed replaced."""
    noise = replace(config.scenario.noise, seed=seed)
    scenario = replace(config.scenario, noise=noise)
    return replace(config, scenario=scenario)
