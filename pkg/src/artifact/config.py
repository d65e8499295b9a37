"""Run configuration: strict TOML parsing with field-level errors.

Silent typos in physics parameters are the main operator hazard, so parsing
is deliberately strict: unknown sections or keys are rejected by name, types
are checked (booleans are not accepted where numbers are expected), and both
seeds are required — there is no entropy default, every run is reproducible
from its config file alone.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .field import FieldParams
from .grid import GridSpec
from .particle import ParticleParams


class ConfigError(ValueError):
    """The config file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class BenchSettings:
    """Benchmark harness knobs (``[bench]`` section)."""

    n_paths: int = 16384
    t_final: float = 1.0
    grid_start: int = 64
    grid_max: int = 1024


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration."""

    model: str
    dt: float
    t_final: float
    sample_interval: float
    n_paths: int
    n_realizations: int
    breed_tolerance: float
    fixed_point_iterations: int
    divergence_policy: str
    seed_real: int
    seed_fict: int
    particle: ParticleParams
    field: FieldParams
    grid: GridSpec
    bench: BenchSettings


_RUN_KEYS = {
    "model": (str, None),
    "dt": (float, None),
    "t_final": (float, None),
    "sample_interval": (float, None),
    "n_paths": (int, None),
    "n_realizations": (int, 1),
    "breed_tolerance": (float, 1e-4),
    "fixed_point_iterations": (int, 4),
    "divergence_policy": (str, "abort"),
    "seed_real": (int, None),
    "seed_fict": (int, None),
}

_PARTICLE_KEYS = {
    "gamma": (float, 1.0),
    "k_p": (float, -1.35),
    "x0": (float, ParticleParams.x0),
}

_FIELD_KEYS = {
    "gamma": (float, 1.0),
    "k_p": (float, -1.35),
    "x0": (float, FieldParams.x0),
    "N": (float, 1.0),
    "modes": (int, 32),
    "box_length": (float, 16.0),
    "weight_mode": (str, "real"),
}

_GRID_KEYS = {
    "n_x": (int, 256),
    "n_p": (int, 256),
    "half_width": (float, 8.0),
}

_BENCH_KEYS = {
    "n_paths": (int, 16384),
    "t_final": (float, 1.0),
    "grid_start": (int, 64),
    "grid_max": (int, 1024),
}

_SECTIONS = {
    "run": _RUN_KEYS,
    "particle": _PARTICLE_KEYS,
    "field": _FIELD_KEYS,
    "grid": _GRID_KEYS,
    "bench": _BENCH_KEYS,
}


def _coerce(section: str, key: str, value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}")
        return int(value)
    if not isinstance(value, str):
        raise ConfigError(f"[{section}] {key}: expected a string, got {value!r}")
    return value


def _read_section(data: dict, section: str) -> dict:
    spec = _SECTIONS[section]
    raw = data.get(section, {})
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}")
    values = {}
    for key, (kind, default) in spec.items():
        if key in raw:
            values[key] = _coerce(section, key, raw[key], kind)
        elif default is None:
            raise ConfigError(f"[{section}] {key} is required")
        else:
            values[key] = default
    return values


def load_config(path) -> RunConfig:
    """Parse and validate a TOML config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as handle:
            data = tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if "run" not in data:
        raise ConfigError("missing required [run] section")

    run = _read_section(data, "run")
    if run["model"] not in ("particle", "field"):
        raise ConfigError(f"[run] model must be 'particle' or 'field', got {run['model']!r}")
    if not run["dt"] > 0.0:
        raise ConfigError("[run] dt must be positive")
    if run["t_final"] < 0.0:
        raise ConfigError("[run] t_final must be nonnegative")
    if not run["sample_interval"] > 0.0:
        raise ConfigError("[run] sample_interval must be positive")
    if run["n_paths"] < 1:
        raise ConfigError("[run] n_paths must be at least 1")
    if run["n_realizations"] < 1:
        raise ConfigError("[run] n_realizations must be at least 1")
    if not 0.0 <= run["breed_tolerance"] < 1.0:
        raise ConfigError("[run] breed_tolerance must lie in [0, 1)")
    if run["fixed_point_iterations"] < 1:
        raise ConfigError("[run] fixed_point_iterations must be at least 1")
    if run["divergence_policy"] not in ("abort", "recycle"):
        raise ConfigError("[run] divergence_policy must be 'abort' or 'recycle'")
    if run["seed_real"] < 0 or run["seed_fict"] < 0:
        raise ConfigError("[run] seeds must be nonnegative integers")

    particle_raw = _read_section(data, "particle")
    field_raw = _read_section(data, "field")
    grid_raw = _read_section(data, "grid")
    bench_raw = _read_section(data, "bench")
    try:
        particle = ParticleParams(
            gamma=particle_raw["gamma"],
            feedback_gain=particle_raw["k_p"],
            x0=particle_raw["x0"],
            dt=run["dt"],
        )
        field = FieldParams(
            gamma=field_raw["gamma"],
            feedback_gain=field_raw["k_p"],
            x0=field_raw["x0"],
            n_atoms=field_raw["N"],
            modes=field_raw["modes"],
            box_length=field_raw["box_length"],
            dt=run["dt"],
            weight_mode=field_raw["weight_mode"],
        )
        grid = GridSpec(
            n_x=grid_raw["n_x"], n_p=grid_raw["n_p"], half_width=grid_raw["half_width"]
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    bench = BenchSettings(
        n_paths=bench_raw["n_paths"],
        t_final=bench_raw["t_final"],
        grid_start=bench_raw["grid_start"],
        grid_max=bench_raw["grid_max"],
    )
    if bench.n_paths < 2 or bench.grid_start < 8 or bench.grid_max < bench.grid_start:
        raise ConfigError("[bench] needs n_paths >= 2 and grid_max >= grid_start >= 8")

    return RunConfig(
        model=run["model"],
        dt=run["dt"],
        t_final=run["t_final"],
        sample_interval=run["sample_interval"],
        n_paths=run["n_paths"],
        n_realizations=run["n_realizations"],
        breed_tolerance=run["breed_tolerance"],
        fixed_point_iterations=run["fixed_point_iterations"],
        divergence_policy=run["divergence_policy"],
        seed_real=run["seed_real"],
        seed_fict=run["seed_fict"],
        particle=particle,
        field=field,
        grid=grid,
        bench=bench,
    )


def override_seeds(
    config: RunConfig, seed_real: int | None, seed_fict: int | None
) -> RunConfig:
    """Apply CLI seed overrides, keeping everything else fixed."""
    updates = {}
    if seed_real is not None:
        if seed_real < 0:
            raise ConfigError("--seed-real must be nonnegative")
        updates["seed_real"] = seed_real
    if seed_fict is not None:
        if seed_fict < 0:
            raise ConfigError("--seed-fict must be nonnegative")
        updates["seed_fict"] = seed_fict
    return replace(config, **updates) if updates else config


def canonical_echo(config: RunConfig, sections: tuple[str, ...] = ()) -> dict[str, object]:
    """Flatten the resolved config into ordered ``section.key`` entries.

    Only run-defining entries appear: output locations, thread counts, and
    replay sources never change results, so they are excluded and replayed
    runs echo identically to their originals.
    """
    echo: dict[str, object] = {
        "run.model": config.model,
        "run.dt": config.dt,
        "run.t_final": config.t_final,
        "run.sample_interval": config.sample_interval,
        "run.n_paths": config.n_paths,
        "run.n_realizations": config.n_realizations,
        "run.breed_tolerance": config.breed_tolerance,
        "run.fixed_point_iterations": config.fixed_point_iterations,
        "run.divergence_policy": config.divergence_policy,
        "run.seed_real": config.seed_real,
        "run.seed_fict": config.seed_fict,
    }
    wanted = set(sections) if sections else {config.model}
    if "particle" in wanted:
        echo.update(
            {
                "particle.gamma": config.particle.gamma,
                "particle.k_p": config.particle.feedback_gain,
                "particle.x0": config.particle.x0,
            }
        )
    if "field" in wanted:
        echo.update(
            {
                "field.gamma": config.field.gamma,
                "field.k_p": config.field.feedback_gain,
                "field.x0": config.field.x0,
                "field.N": config.field.n_atoms,
                "field.modes": config.field.modes,
                "field.box_length": config.field.box_length,
                "field.weight_mode": config.field.weight_mode,
            }
        )
    if "grid" in wanted:
        echo.update(
            {
                "grid.n_x": config.grid.n_x,
                "grid.n_p": config.grid.n_p,
                "grid.half_width": config.grid.half_width,
            }
        )
    if "bench" in wanted:
        echo.update(
            {
                "bench.n_paths": config.bench.n_paths,
                "bench.t_final": config.bench.t_final,
                "bench.grid_start": config.bench.grid_start,
                "bench.grid_max": config.bench.grid_max,
            }
        )
    return echo
