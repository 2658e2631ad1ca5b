"""Command-line front end.

Three subcommands:

* ``geonuts trajectory --config c.json --out traj.csv`` -- integrate one
  trajectory and write the per-step trace (states, energy, both criterion
  values and their fired flags) as CSV.
* ``geonuts sample --config c.json --out draws.csv --summary summary.json`` --
  run one or more chains and write the draws CSV plus a JSON summary.
* ``geonuts modes --config c.json`` -- print the quadratic system's
  eigenfrequencies, mode directions, and predicted criterion-zero times as
  JSON.

Exit codes: 0 success, 1 config error, 2 I/O error, 3 numerical failure.
Floats are written with 17 significant digits so CSV values round-trip
exactly; fixed seeds therefore reproduce byte-identical files.  The
``GEONUTS_SEED`` environment variable overrides the configured seeds, and
explicit flags override everything.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_integrator_config,
    build_metric,
    build_sampler_config,
    build_target,
    parse_config,
)
from .harmonic import eigenfrequencies, fit_initial_conditions, predict_first_zero
from .integrators import DivergenceError, integrate_trajectory
from .metrics import sample_momentum
from .phase import PhasePoint, TrajectoryTrace
from .sampler import run_chain

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

SEED_ENV_VAR = "GEONUTS_SEED"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_csv_header(dim: int) -> str:
    qs = ",".join(f"q{i + 1}" for i in range(dim))
    ps = ",".join(f"p{i + 1}" for i in range(dim))
    return f"step,t,{qs},{ps},H,crit_classic,crit_generalized,fired_classic,fired_generalized"


def render_trajectory_csv(trace: TrajectoryTrace) -> str:
    dim = trace.entries[0].state.dim
    lines = [trajectory_csv_header(dim)]
    for k, e in enumerate(trace.entries):
        fields = [str(k), _fmt(e.t)]
        fields += [_fmt(v) for v in e.state.q]
        fields += [_fmt(v) for v in e.state.p]
        fields += [
            _fmt(e.hamiltonian),
            _fmt(e.criterion_classic),
            _fmt(e.criterion_generalized),
            str(int(e.fired_classic)),
            str(int(e.fired_generalized)),
        ]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def draws_csv_header(dim: int) -> str:
    qs = ",".join(f"q{i + 1}" for i in range(dim))
    return f"draw,{qs},tree_depth,n_leapfrog,divergent,energy_error"


def _write_text(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def run_trajectory_mode(config: ExperimentConfig) -> int:
    target = build_target(config)
    metric = build_metric(config, target)
    int_config = build_integrator_config(config)
    q0 = np.array(config.trajectory.q0)
    if config.trajectory.p0 is not None:
        p0 = np.array(config.trajectory.p0)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(config.trajectory.seed))
        p0 = sample_momentum(metric.at(q0), rng)
    trace = integrate_trajectory(
        PhasePoint(q0, p0),
        config.trajectory.n_steps,
        target,
        metric,
        int_config,
        active_criterion=config.criterion.kind,
        transient_guard_floor=config.criterion.transient_guard_steps,
        divergence_threshold=config.sampler.divergence_threshold,
    )
    _write_text(config.out_path, render_trajectory_csv(trace))
    if trace.terminated_at is not None:
        print(f"criterion '{config.criterion.kind}' fired at t={trace.terminated_at:g}")
    else:
        print(f"criterion '{config.criterion.kind}' did not fire within {config.trajectory.n_steps} steps")
    print(f"wrote {len(trace)} rows to {config.out_path}")
    return EXIT_OK


def run_sample_mode(config: ExperimentConfig) -> int:
    target = build_target(config)
    metric = build_metric(config, target)
    int_config = build_integrator_config(config)
    sampler_config = build_sampler_config(config)
    q0 = np.array(config.trajectory.q0)

    t0 = time.perf_counter()
    seed_seq = np.random.SeedSequence(sampler_config.seed)
    children = seed_seq.spawn(config.n_chains)
    results = [
        run_chain(target, metric, int_config, sampler_config, q0,
                  rng=np.random.default_rng(children[i]))
        for i in range(config.n_chains)
    ]
    wall = time.perf_counter() - t0

    dim = target.dim
    lines = [draws_csv_header(dim)]
    row = 0
    for res in results:
        for k in range(res.draws.shape[0]):
            st = res.stats[k]
            fields = [str(row)]
            fields += [_fmt(v) for v in res.draws[k]]
            fields += [str(st.tree_depth), str(st.n_leapfrog), str(int(st.divergent)),
                       _fmt(st.energy_error)]
            lines.append(",".join(fields))
            row += 1
    _write_text(config.out_path, "\n".join(lines) + "\n")

    pooled = np.vstack([res.draws for res in results])
    ess = np.sum([res.summary["ess"] for res in results], axis=0)
    summary = {
        "n_chains": config.n_chains,
        "n_draws": int(pooled.shape[0]),
        "seed": config.sampler.seed,
        "means": pooled.mean(axis=0).tolist(),
        "covariance": (np.cov(pooled, rowvar=False).reshape(dim, dim).tolist()
                       if pooled.shape[0] > 1 else np.zeros((dim, dim)).tolist()),
        "ess": ess.tolist(),
        "n_divergent": int(sum(res.summary["n_divergent"] for res in results)),
        "mean_n_leapfrog": float(np.mean([res.summary["mean_n_leapfrog"] for res in results])),
        "mean_tree_depth": float(np.mean([res.summary["mean_tree_depth"] for res in results])),
        "wall_time_s": wall,
    }
    if config.summary_path is not None:
        _write_text(config.summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {pooled.shape[0]} draws to {config.out_path} "
          f"({summary['n_divergent']} divergent, {wall:.2f}s)")
    return EXIT_OK


def run_modes_mode(config: ExperimentConfig) -> int:
    if config.target.kind != "gaussian":
        raise ConfigError("modes requires a gaussian target (a quadratic potential)")
    if config.metric.kind != "euclidean":
        raise ConfigError("modes requires a euclidean metric (a constant mass matrix)")
    target = build_target(config)
    metric = build_metric(config, target)
    modes = eigenfrequencies(metric.mass, target.precision)

    q0 = np.array(config.trajectory.q0)
    # The analysis command treats an unset p0 as a launch from rest.
    p0 = np.array(config.trajectory.p0) if config.trajectory.p0 is not None else np.zeros(target.dim)
    fitted = fit_initial_conditions(modes, q0, p0)
    periods = (2.0 * np.pi / modes.omega).tolist()
    report = {
        "omega": modes.omega.tolist(),
        "periods": periods,
        "degenerate": modes.is_degenerate(),
        "modes": [modes.mode_matrix[:, j].tolist() for j in range(modes.dim)],
        "predicted_zero_times": {"incoherent": [0.5 * t for t in periods]},
        "launch": {
            "q0": q0.tolist(),
            "p0": p0.tolist(),
            "amplitudes": [m.amplitude for m in fitted],
            "phases": [m.phase for m in fitted],
        },
    }
    try:
        report["launch"]["predicted_first_zero"] = predict_first_zero(fitted)
    except ValueError:
        report["launch"]["predicted_first_zero"] = None
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, help="override sampler and trajectory seeds")
    parser.add_argument("--step-size", type=float, dest="step_size", help="override integrator step size")
    parser.add_argument("--criterion", choices=["classic", "generalized"],
                        help="override the active termination criterion")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geonuts",
        description="Hamiltonian Monte Carlo trajectories, samplers, and turning-point diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    traj = sub.add_parser("trajectory", help="integrate one trajectory and write its CSV trace")
    _add_common_flags(traj)
    traj.add_argument("--out", required=True, help="output CSV path")
    traj.add_argument("--steps", type=int, help="override trajectory step count")

    samp = sub.add_parser("sample", help="run chains and write draws CSV plus summary JSON")
    _add_common_flags(samp)
    samp.add_argument("--out", required=True, help="output CSV path")
    samp.add_argument("--summary", help="output summary JSON path")
    samp.add_argument("--chains", type=int, default=1, help="number of chains (default 1)")
    samp.add_argument("--n-draws", type=int, dest="n_draws", help="override kept draws per chain")

    modes = sub.add_parser("modes", help="print eigenfrequencies and predicted zero times as JSON")
    _add_common_flags(modes)
    return parser


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError as err:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env_seed!r}") from err
        overrides["sampler.seed"] = seed
        overrides["trajectory.seed"] = seed
    if args.seed is not None:
        overrides["sampler.seed"] = args.seed
        overrides["trajectory.seed"] = args.seed
    if args.step_size is not None:
        overrides["integrator.step_size"] = args.step_size
    if args.criterion is not None:
        overrides["criterion.kind"] = args.criterion
    if getattr(args, "steps", None) is not None:
        overrides["trajectory.n_steps"] = args.steps
    if getattr(args, "n_draws", None) is not None:
        overrides["sampler.n_draws"] = args.n_draws
    return overrides


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = None
        if args.config is not None:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as err:
                raise ConfigError(f"cannot read config file {args.config}: {err}") from err
        config = parse_config(text, args.command, _collect_overrides(args))
        if getattr(args, "chains", None) is not None and args.chains < 1:
            raise ConfigError(f"--chains must be >= 1, got {args.chains}")
        config = ExperimentConfig(
            **{**config.__dict__,
               "out_path": getattr(args, "out", None),
               "summary_path": getattr(args, "summary", None),
               "n_chains": getattr(args, "chains", 1)},
        )
        if args.command == "trajectory":
            return run_trajectory_mode(config)
        if args.command == "sample":
            return run_sample_mode(config)
        return run_modes_mode(config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except DivergenceError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry_point() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
