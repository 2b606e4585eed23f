"""Command-line harness.

Subcommands:

  run      simulate the configured scenario, write the trajectory log and
           a key = value summary
  verify   run the numerical stability checks (eigenstructure, Lyapunov
           decrease, convergence sweep) and report pass/fail
  sweep    convergence sweep only, with sample-count and duration knobs
  compare  run the scenario once and contrast the unit-tilt estimate with
           the unconstrained intermediate stage on the same input stream

Exit codes: 0 success, 1 a verification check failed, 2 configuration
error, 3 the simulation diverged.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import analysis
from .config import ConfigError, RunConfig, load_config, with_seed
from .simulator import SimulationDivergedError, run_scenario
from .trajlog import TrajectoryLog

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3

CONVERGENCE_THRESHOLD_RAD = 0.01


def _load(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    if args.out:
        config = replace(config, output=args.out)
    return config


def _emit(lines, quiet: bool) -> None:
    if not quiet:
        for line in lines:
            print(line)


def _write_report(outdir: str, name: str, lines) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, name)
    with open(path, "w") as f:
        for line in lines:
            f.write(line + "\n")
    return path


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _kv(pairs):
    return [f"{key} = {_fmt(value)}" for key, value in pairs]


def _convergence_time(times: np.ndarray, err: np.ndarray) -> float:
    below = np.nonzero(err < CONVERGENCE_THRESHOLD_RAD)[0]
    return float(times[below[0]]) if len(below) else float("nan")


def _run_summary(result) -> list:
    times = result.times
    err = result.err_full
    conv = _convergence_time(times, err)
    pairs = [
        ("rows", len(times)),
        ("duration_s", float(times[-1])),
        ("scenario", result.scenario.fingerprint()),
        ("seed", result.scenario.noise.seed),
        ("convergence_time_s", conv),
        ("final_error_rad", float(err[-1])),
        ("max_error_rad", float(err.max())),
    ]
    if np.isfinite(conv):
        start = max(2.0 * conv, 2.0)
        tail = err[times >= start]
        pairs.append(("post_convergence_window_start_s", start))
        pairs.append(("post_convergence_rms_rad",
                      float(np.sqrt(np.mean(tail ** 2)))))
        try:
            rate = analysis.measure_convergence_rate(
                times, err, window=(0.05, conv), floor=1e-12)
        except ValueError:
            rate = float("nan")
        pairs.append(("measured_local_rate", rate))
    else:
        pairs.append(("post_convergence_rms_rad", float("nan")))
        pairs.append(("measured_local_rate", float("nan")))
    v = result.lyapunov
    rising = np.diff(v) > 0.0
    awake = result.err_full[:-1] > 1e-9
    pairs.append(("lyapunov_violations", int(np.count_nonzero(rising & awake))))
    return pairs


def _decimated(log: TrajectoryLog, cadence_hz: float, dt: float) -> TrajectoryLog:
    stride = max(1, int(round(1.0 / (cadence_hz * dt))))
    metadata = dict(log.metadata)
    metadata["log_cadence_hz"] = _fmt(1.0 / (stride * dt))
    return TrajectoryLog(metadata=metadata, data=log.data[::stride])


def _cmd_run(args) -> int:
    config = _load(args)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    result = run_scenario(config.scenario)
    log = _decimated(result.log, config.log_cadence_hz,
                     config.scenario.dt_control)
    os.makedirs(config.output, exist_ok=True)
    csv_path = os.path.join(config.output, "trajectory.csv")
    log.write_csv(csv_path)
    lines = _kv(_run_summary(result))
    _write_report(config.output, "summary.txt", lines)
    _emit(lines + [f"trajectory written to {csv_path}"], args.quiet)
    return EXIT_OK


def _eigen_lines(gains, g0):
    """Report lines plus pass flag for the three linearizations."""
    ok = True
    lines = []
    for report in analysis.all_linearization_reports(gains, g0):
        predicted = analysis.predicted_spectrum(report.identifier, gains)
        mismatch = float(np.abs(report.eigenvalues - predicted).max())
        should_be_hurwitz = bool(predicted.real.max() < 0.0)
        good = (mismatch <= 1e-8
                and report.char_poly_residual <= 1e-6
                and report.is_hurwitz == should_be_hurwitz)
        ok &= good
        lines.append(f"[{report.identifier}]")
        lines += _kv([
            ("eigenvalues", " ".join(format(e, ".12g")
                                     for e in report.eigenvalues)),
            ("spectral_abscissa", report.spectral_abscissa),
            ("is_hurwitz", report.is_hurwitz),
            ("char_poly_residual", report.char_poly_residual),
            ("max_eigenvalue_mismatch", mismatch),
            ("status", "PASS" if good else "FAIL"),
        ])
    return lines, ok


def _cmd_verify(args) -> int:
    config = _load(args)
    v = config.verify
    if args.seed is not None:
        v = replace(v, seed=args.seed)
    if args.samples is not None:
        v = replace(v, lyapunov_samples=args.samples,
                    sweep_samples=args.samples)
    checks = v.checks if args.verify == "all" else (args.verify,)
    gains = config.scenario.gains
    g0 = config.scenario.g0
    ok = True
    lines = []
    if "eigen" in checks:
        eig_lines, eig_ok = _eigen_lines(gains, g0)
        ok &= eig_ok
        lines += eig_lines
    if "lyapunov" in checks:
        res = analysis.certificate_sweep(
            gains, g0, n=v.lyapunov_samples, duration=v.lyapunov_duration,
            dt=v.dt, seed=v.seed, ball_radius=v.ball_radius,
            cap_radius=v.cap_radius, norm_floor=v.norm_floor,
        )
        ok &= res.passed
        lines.append("[lyapunov]")
        lines += _kv([
            ("trajectories", res.n_trajectories),
            ("steps", res.n_steps),
            ("violations", res.violations),
            ("worst_rate_margin", res.worst_rate_margin),
            ("max_final_norm", res.max_final_norm),
            ("status", "PASS" if res.passed else "FAIL"),
        ])
    if "sweep" in checks:
        res = analysis.convergence_sweep(
            gains, g0, n=v.sweep_samples, duration=v.sweep_duration,
            dt=v.dt, threshold=v.threshold, seed=v.seed,
            ball_radius=v.sweep_ball_radius, cap_radius=v.cap_radius,
        )
        ok &= res.all_converged
        lines.append("[sweep]")
        lines += _kv([
            ("trajectories", res.n_trajectories),
            ("converged", res.n_converged),
            ("threshold", res.threshold),
            ("worst_final_norm", res.worst_final_norm),
            ("slowest_convergence_s", _slowest(res)),
            ("status", "PASS" if res.all_converged else "FAIL"),
        ])
    _write_report(config.output, "verify.txt", lines)
    _emit(lines, args.quiet)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def _slowest(res) -> float:
    finite = res.first_pass_times[np.isfinite(res.first_pass_times)]
    return float(finite.max()) if len(finite) else float("inf")


def _cmd_sweep(args) -> int:
    config = _load(args)
    v = config.verify
    if args.seed is not None:
        v = replace(v, seed=args.seed)
    n = args.samples if args.samples is not None else v.sweep_samples
    duration = args.duration if args.duration is not None else v.sweep_duration
    res = analysis.convergence_sweep(
        config.scenario.gains, config.scenario.g0, n=n, duration=duration,
        dt=v.dt, threshold=v.threshold, seed=v.seed,
        ball_radius=v.sweep_ball_radius, cap_radius=v.cap_radius,
    )
    lines = _kv([
        ("trajectories", res.n_trajectories),
        ("duration_s", duration),
        ("threshold", res.threshold),
        ("converged", res.n_converged),
        ("worst_final_norm", res.worst_final_norm),
        ("slowest_convergence_s", _slowest(res)),
        ("status", "PASS" if res.all_converged else "FAIL"),
    ])
    _write_report(config.output, "sweep.txt", lines)
    _emit(lines, args.quiet)
    return EXIT_OK if res.all_converged else EXIT_VERIFY_FAILED


def _cmd_compare(args) -> int:
    config = _load(args)
    if args.seed is not None:
        config = with_seed(config, args.seed)
    result = run_scenario(config.scenario)
    times = result.times
    conv = _convergence_time(times, result.err_full)
    start = max(2.0 * conv, 2.0) if np.isfinite(conv) else 0.0
    window = times >= start
    sd_full = float(result.err_full[window].std())
    sd_inter = float(result.err_intermediate[window].std())
    unit_dev = np.abs(
        np.linalg.norm(result.log.vector("x2hat"), axis=1) - 1.0)
    free_dev = np.abs(result.tilt_free_norm - 1.0)
    lines = _kv([
        ("window_start_s", start),
        ("sd_full_rad", sd_full),
        ("sd_intermediate_rad", sd_inter),
        ("sd_ratio", sd_full / sd_inter if sd_inter else float("nan")),
        ("max_unit_norm_deviation", float(unit_dev.max())),
        ("max_free_norm_deviation", float(free_dev.max())),
    ])
    os.makedirs(config.output, exist_ok=True)
    path = os.path.join(config.output, "compare.csv")
    with open(path, "w") as f:
        f.write("t,err_full_rad,err_intermediate_rad,tilt_free_norm\n")
        for row in zip(times, result.err_full, result.err_intermediate,
                       result.tilt_free_norm):
            f.write(",".join(format(x, ".17g") for x in row) + "\n")
    _write_report(config.output, "compare.txt", lines)
    _emit(lines + [f"comparison series written to {path}"], args.quiet)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiltobs",
        description="Tilt-observer simulation and verification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH",
                       help="INI configuration file (defaults when omitted)")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, metavar="N",
                       help="override the noise seed (run/compare) or "
                            "sampling seed (verify/sweep)")
        p.add_argument("--quiet", action="store_true",
                       help="suppress stdout; files are still written")

    p_run = sub.add_parser("run", help="simulate and log the scenario")
    common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run stability checks")
    common(p_verify)
    p_verify.add_argument("--verify", default="all",
                          choices=("lyapunov", "eigen", "sweep", "all"),
                          help="which check to run (default all)")
    p_verify.add_argument("--samples", type=int, metavar="N",
                          help="override the sample counts")
    p_verify.set_defaults(func=_cmd_verify)

    p_sweep = sub.add_parser("sweep", help="convergence sweep")
    common(p_sweep)
    p_sweep.add_argument("--samples", type=int, metavar="N",
                         help="number of initial conditions")
    p_sweep.add_argument("--duration", type=float, metavar="S",
                         help="integration horizon in seconds")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_cmp = sub.add_parser(
        "compare",
        help="full observer versus intermediate stage on one input stream")
    common(p_cmp)
    p_cmp.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDivergedError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
