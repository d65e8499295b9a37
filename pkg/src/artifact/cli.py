"""Command line front end.

Subcommands
-----------
``run``
    Integrate the configured model over ``n_realizations`` independent
    measurement records; write per-realization observable CSVs and noise
    records, a cross-realization mean CSV, an SVG energy plot, and a JSON
    summary. ``--replay`` re-runs a single realization from a recorded noise
    file and reproduces its CSV byte for byte.
``replay``
    Re-run one realization from a recorded noise file; equivalent to ``run``
    with ``--replay`` and a single realization.
``compare``
    Particle model only: run the dense phase-space grid solver, the weighted
    ensemble with breeding, and the weighted ensemble without breeding on the
    same measurement record per realization; write the three curve sets, a
    joined comparison CSV of mean curves with normalized discrepancies, and a
    JSON report.
``bench``
    Time the weighted-ensemble solver (at the configured size and at double
    the size, to expose scaling) against the grid solver at matched accuracy;
    write a JSON report. The ratio is informational, never asserted.

Exit codes: 0 success; 1 config or record-format error (message names the
offending field); 2 numerical failure (divergence, step-size, or weight
collapse); 3 partial success (some realizations failed, summary says which);
2 is also returned by argparse for malformed command lines.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, canonical_echo, load_config, override_seeds
from .core import CoefficientModel, DivergenceError
from .ensemble import (
    CollapseError,
    EnsembleSettings,
    ExperimentRecord,
    run_experiment,
)
from .field import FieldModel
from .grid import GridSpec, StepSizeError, run_grid_experiment
from .particle import ParticleModel
from .plotting import save_energy_plot
from .records import (
    RecordFormatError,
    read_noise_record,
    write_noise_record,
    write_observable_csv,
)


def build_model(config: RunConfig) -> CoefficientModel:
    """Instantiate the configured coefficient model."""
    if config.model == "particle":
        return ParticleModel(config.particle)
    return FieldModel(config.field)


def _column_order(model: CoefficientModel) -> tuple[str, ...]:
    return model.csv_columns + ("ess", "breed_events", "removed_weight") + model.csv_extra_columns


def _settings(
    config: RunConfig, realization: int, breed_tolerance: float | None = None
) -> EnsembleSettings:
    return EnsembleSettings(
        n_paths=config.n_paths,
        t_final=config.t_final,
        sample_interval=config.sample_interval,
        seed_real=config.seed_real,
        seed_fict=config.seed_fict,
        realization=realization,
        breed_tolerance=(
            config.breed_tolerance if breed_tolerance is None else breed_tolerance
        ),
        fixed_point_iterations=config.fixed_point_iterations,
        divergence_policy=config.divergence_policy,
    )


def _draw_record(config: RunConfig, realization: int, n_real: int) -> np.ndarray:
    rng = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed_real, realization]))
    )
    n_steps = int(round(config.t_final / config.dt))
    return np.sqrt(config.dt) * rng.standard_normal((n_steps, n_real))


def _cross_stderr(stack: np.ndarray) -> np.ndarray:
    """Standard error of the mean across realizations (axis 0)."""
    n = stack.shape[0]
    if n < 2:
        return np.zeros(stack.shape[1])
    return np.std(stack, axis=0, ddof=1) / np.sqrt(n)


def _run_realizations(model, config: RunConfig, realizations, threads: int):
    """Run realizations, possibly in a thread pool, in deterministic order."""

    def task(r: int) -> ExperimentRecord:
        return run_experiment(model, _settings(config, r))

    if threads <= 1 or len(realizations) <= 1:
        return {r: task(r) for r in realizations}
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {r: pool.submit(task, r) for r in realizations}
        return {r: futures[r].result() for r in realizations}


def cmd_run(
    config: RunConfig,
    out_dir,
    threads: int = 1,
    replay=None,
    replay_realization: int = 0,
) -> int:
    """Execute the ``run`` subcommand; returns the process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(config)
    echo = canonical_echo(config)
    order = _column_order(model)

    if replay is not None:
        increments, record_dt = read_noise_record(replay)
        if abs(record_dt - config.dt) > 1e-15 * max(1.0, config.dt):
            raise ConfigError(
                f"replay record has dt={record_dt!r} but config says dt={config.dt!r}"
            )
        records = {
            replay_realization: run_experiment(
                model, _settings(config, replay_realization), increments
            )
        }
        realizations = [replay_realization]
    else:
        realizations = list(range(config.n_realizations))
        records = _run_realizations(model, config, realizations, threads)

    summary_rows = []
    for r in realizations:
        record = records[r]
        csv_path = out / f"realization_{r:03d}.csv"
        noise_path = out / f"noise_{r:03d}.bin"
        write_observable_csv(csv_path, record.times, record.columns, order, echo)
        write_noise_record(noise_path, record.real_increments, config.dt)
        summary_rows.append(
            {
                "index": r,
                "status": "failed" if record.failed else "ok",
                "failure": record.failure,
                "csv": csv_path.name,
                "noise_record": noise_path.name,
                "final_energy": float(record.columns["energy"][-1]),
                "divergences": record.n_divergences,
            }
        )

    succeeded = [r for r in realizations if not records[r].failed]
    if succeeded and replay is None:
        times = records[succeeded[0]].times
        stacks = {
            name: np.stack([records[r].columns[name] for r in succeeded])
            for name in order
        }
        mean_columns = {name: stacks[name].mean(axis=0) for name in order}
        mean_columns["energy_stderr"] = _cross_stderr(stacks["energy"])
        if "norm" in stacks:
            mean_columns["norm_stderr"] = _cross_stderr(stacks["norm"])
        write_observable_csv(out / "mean.csv", times, mean_columns, order, echo)
        save_energy_plot(
            out / "energy.svg",
            times,
            mean_columns["energy"],
            stderr=mean_columns["energy_stderr"],
            per_realization=[records[r].columns["energy"] for r in succeeded],
            echo=echo,
        )

    summary = {
        "command": "run",
        "config": echo,
        "replay": replay is not None,
        "realizations": summary_rows,
        "n_failed": len(realizations) - len(succeeded),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    if not succeeded:
        print("run failed: every realization diverged", file=sys.stderr)
        return 2
    if len(succeeded) < len(realizations):
        print(
            f"partial success: {len(realizations) - len(succeeded)} of "
            f"{len(realizations)} realizations failed (see summary.json)",
            file=sys.stderr,
        )
        return 3
    return 0


def cmd_compare(config: RunConfig, out_dir, threads: int = 1) -> int:
    """Execute the ``compare`` subcommand; returns the process exit code."""
    if config.model != "particle":
        raise ConfigError("compare supports only model = 'particle'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(config)
    echo = canonical_echo(config, sections=("particle", "grid"))
    order = _column_order(model)
    realizations = list(range(config.n_realizations))

    def task(r: int):
        # The breeding run goes first and its applied feedback sequence is
        # replayed by the other two solvers, so all three face the identical
        # experiment (same measurement record, same control) and differ only
        # in how they represent the conditional state.
        increments = _draw_record(config, r, model.noise.n_real)
        breed_rec = run_experiment(model, _settings(config, r), increments)
        controls = None if breed_rec.failed else breed_rec.controls
        grid_rec = run_grid_experiment(
            config.particle,
            config.grid,
            increments,
            config.t_final,
            config.sample_interval,
            controls=controls,
        )
        nobreed_rec = run_experiment(
            model,
            _settings(config, r, breed_tolerance=0.0),
            increments,
            controls=controls,
        )
        return grid_rec, breed_rec, nobreed_rec

    if threads <= 1 or len(realizations) <= 1:
        results = {r: task(r) for r in realizations}
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {r: pool.submit(task, r) for r in realizations}
            results = {r: futures[r].result() for r in realizations}

    for r in realizations:
        grid_rec, breed_rec, nobreed_rec = results[r]
        write_observable_csv(
            out / f"grid_{r:03d}.csv", grid_rec.times, grid_rec.columns, order, echo
        )
        write_observable_csv(
            out / f"breed_{r:03d}.csv", breed_rec.times, breed_rec.columns, order, echo
        )
        write_observable_csv(
            out / f"nobreed_{r:03d}.csv",
            nobreed_rec.times,
            nobreed_rec.columns,
            order,
            echo,
        )

    usable = [r for r in realizations if not results[r][1].failed]
    if not usable:
        print("compare failed: every breeding run diverged", file=sys.stderr)
        return 2
    times = results[usable[0]][0].times
    grid_stack = np.stack([results[r][0].columns["energy"] for r in usable])
    breed_stack = np.stack([results[r][1].columns["energy"] for r in usable])
    grid_mean = grid_stack.mean(axis=0)
    breed_mean = breed_stack.mean(axis=0)
    grid_err = _cross_stderr(grid_stack)
    breed_err = _cross_stderr(breed_stack)
    combined = np.sqrt(grid_err**2 + breed_err**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        z_breed = np.where(
            combined > 0,
            (breed_mean - grid_mean) / np.where(combined > 0, combined, 1.0),
            np.where(breed_mean == grid_mean, 0.0, np.inf),
        )

    # The no-breeding curves may be truncated by divergence; compare on the
    # common prefix and treat a divergence as a departure at that time.
    nobreed_records = [results[r][2] for r in usable]
    prefix = min(rec.times.size for rec in nobreed_records)
    nobreed_stack = np.stack([rec.columns["energy"][:prefix] for rec in nobreed_records])
    nobreed_mean = nobreed_stack.mean(axis=0)
    nobreed_err = _cross_stderr(nobreed_stack)
    combined_nb = np.sqrt(grid_err[:prefix] ** 2 + nobreed_err**2)
    with np.errstate(invalid="ignore", divide="ignore"):
        z_nobreed = np.where(
            combined_nb > 0,
            (nobreed_mean - grid_mean[:prefix]) / np.where(combined_nb > 0, combined_nb, 1.0),
            np.where(nobreed_mean == grid_mean[:prefix], 0.0, np.inf),
        )

    departure_time = None
    beyond = np.nonzero(np.abs(z_nobreed) > 3.0)[0]
    if beyond.size:
        departure_time = float(times[beyond[0]])
    elif any(rec.failed for rec in nobreed_records):
        departure_time = float(
            min(rec.times[-1] for rec in nobreed_records if rec.failed)
        )

    joined_columns = {
        "energy_grid": grid_mean,
        "energy_grid_stderr": grid_err,
        "energy_breed": breed_mean,
        "energy_breed_stderr": breed_err,
        "z_breed": z_breed,
        "energy_nobreed": _pad(nobreed_mean, times.size),
        "energy_nobreed_stderr": _pad(nobreed_err, times.size),
        "z_nobreed": _pad(z_nobreed, times.size),
    }
    write_observable_csv(
        out / "compare.csv", times, joined_columns, tuple(joined_columns), echo
    )

    per_real_max_z = []
    for r in usable:
        grid_energy = results[r][0].columns["energy"]
        breed_energy = results[r][1].columns["energy"]
        stderr = results[r][1].columns["energy_stderr"]
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.abs(breed_energy - grid_energy) / np.where(stderr > 0, stderr, np.inf)
        per_real_max_z.append(float(np.max(z)))

    max_abs_z = float(np.max(np.abs(z_breed)))
    report = {
        "command": "compare",
        "config": echo,
        "n_realizations": len(realizations),
        "n_usable": len(usable),
        "max_abs_z_breed": max_abs_z,
        "max_abs_z_breed_time": float(times[int(np.argmax(np.abs(z_breed)))]),
        "departure_time_nobreed": departure_time,
        "nobreed_failures": sum(rec.failed for rec in nobreed_records),
        "per_realization_max_z_breed": per_real_max_z,
    }
    (out / "compare_report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(
        f"compare: max |z| with breeding {max_abs_z:.3f}; "
        f"no-breeding departure at t={departure_time}"
    )
    if len(usable) < len(realizations):
        return 3
    return 0


def _pad(values: np.ndarray, length: int) -> np.ndarray:
    """Right-pad a truncated curve with nan to the full sample count."""
    if values.size == length:
        return values
    padded = np.full(length, np.nan)
    padded[: values.size] = values
    return padded


def cmd_bench(config: RunConfig, out_dir) -> int:
    """Execute the ``bench`` subcommand; returns the process exit code."""
    if config.model != "particle":
        raise ConfigError("bench supports only model = 'particle'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bench = config.bench
    model = build_model(config)
    increments = np.sqrt(config.dt) * np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([config.seed_real, 0]))
    ).standard_normal((int(round(bench.t_final / config.dt)), model.noise.n_real))

    def timed_run(n_paths: int):
        settings = EnsembleSettings(
            n_paths=n_paths,
            t_final=bench.t_final,
            sample_interval=bench.t_final,
            seed_real=config.seed_real,
            seed_fict=config.seed_fict,
            breed_tolerance=config.breed_tolerance,
            fixed_point_iterations=config.fixed_point_iterations,
        )
        start = time.perf_counter()
        record = run_experiment(model, settings, increments)
        return time.perf_counter() - start, record

    base_seconds, base_record = timed_run(bench.n_paths)
    double_seconds, _ = timed_run(2 * bench.n_paths)
    stderr = float(base_record.columns["energy_stderr"][-1])

    resolution = bench.grid_start
    previous_energy = None
    grid_seconds = None
    grid_error = None
    converged = False
    while resolution <= bench.grid_max:
        spec = GridSpec(n_x=resolution, n_p=resolution, half_width=config.grid.half_width)
        start = time.perf_counter()
        grid_record = run_grid_experiment(
            config.particle, spec, increments, bench.t_final, bench.t_final
        )
        grid_seconds = time.perf_counter() - start
        energy = float(grid_record.columns["energy"][-1])
        if previous_energy is not None:
            grid_error = abs(energy - previous_energy)
            if grid_error < stderr:
                converged = True
                break
        previous_energy = energy
        resolution *= 2

    scaling = double_seconds / base_seconds
    speedup = grid_seconds / base_seconds
    report = {
        "command": "bench",
        "config": canonical_echo(config, sections=("particle", "grid", "bench")),
        "ensemble_paths": bench.n_paths,
        "ensemble_seconds": base_seconds,
        "ensemble_seconds_doubled": double_seconds,
        "scaling_ratio": scaling,
        "ensemble_stderr": stderr,
        "grid_resolution": min(resolution, bench.grid_max),
        "grid_seconds": grid_seconds,
        "grid_error_estimate": grid_error,
        "grid_converged": converged,
        "speedup_ratio": speedup,
    }
    (out / "bench.json").write_text(json.dumps(report, indent=2) + "\n")
    print(
        f"ensemble: {bench.n_paths} paths in {base_seconds:.2f} s "
        f"({2 * bench.n_paths} paths in {double_seconds:.2f} s, scaling x{scaling:.2f})"
    )
    print(
        f"grid: {min(resolution, bench.grid_max)}^2 points in {grid_seconds:.2f} s "
        f"(error estimate {grid_error!r} vs ensemble stderr {stderr:.2e})"
    )
    print(f"wall-clock ratio grid/ensemble: {speedup:.1f}x")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact",
        description="Weighted stochastic trajectory simulator for measured, feedback-controlled systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, threads: bool = True) -> None:
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed-real", type=int, default=None, help="override [run] seed_real")
        p.add_argument("--seed-fict", type=int, default=None, help="override [run] seed_fict")
        if threads:
            p.add_argument(
                "--threads", type=int, default=1, help="realizations to run in parallel"
            )

    run_p = sub.add_parser("run", help="integrate the configured model")
    common(run_p)
    run_p.add_argument("--replay", default=None, help="noise record to replay")
    run_p.add_argument(
        "--replay-realization",
        type=int,
        default=0,
        help="realization index the record belongs to",
    )
    replay_p = sub.add_parser("replay", help="re-run one realization from a noise record")
    common(replay_p, threads=False)
    replay_p.add_argument("--replay", required=True, help="noise record to replay")
    replay_p.add_argument(
        "--replay-realization",
        type=int,
        default=0,
        help="realization index the record belongs to",
    )
    compare_p = sub.add_parser("compare", help="grid vs weighted ensemble on shared noise")
    common(compare_p)
    bench_p = sub.add_parser("bench", help="time the solvers at matched accuracy")
    common(bench_p, threads=False)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = load_config(args.config)
        config = override_seeds(config, args.seed_real, args.seed_fict)
        if args.command in ("run", "replay"):
            return cmd_run(
                config,
                args.out,
                threads=getattr(args, "threads", 1),
                replay=args.replay,
                replay_realization=args.replay_realization,
            )
        if args.command == "compare":
            return cmd_compare(config, args.out, threads=args.threads)
        return cmd_bench(config, args.out)
    except (ConfigError, RecordFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (DivergenceError, StepSizeError, CollapseError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
