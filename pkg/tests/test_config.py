"""Strict TOML config parsing: defaults, validation, and the canonical echo."""

import numpy as np
import pytest

from artifact.config import (
    ConfigError,
    canonical_echo,
    load_config,
    override_seeds,
)

MINIMAL = """
[run]
model = "particle"
dt = 1e-3
t_final = 1.0
sample_interval = 0.5
n_paths = 100
seed_real = 1
seed_fict = 2
"""


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_and_defaults(tmp_path):
    config = load_config(_write(tmp_path, MINIMAL))
    assert config.model == "particle"
    assert config.dt == 1e-3
    assert config.n_realizations == 1
    assert config.breed_tolerance == 1e-4
    assert config.fixed_point_iterations == 4
    assert config.divergence_policy == "abort"
    assert config.particle.gamma == 1.0
    assert config.particle.feedback_gain == -1.35
    assert config.particle.x0 == pytest.approx(np.sqrt(5.0))
    assert config.particle.dt == 1e-3
    assert config.field.modes == 32
    assert config.field.weight_mode == "real"
    assert config.grid.n_x == 256
    assert config.bench.n_paths == 16384


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_malformed_toml(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "[run\nmodel ="))


def test_unknown_section_is_named(tmp_path):
    with pytest.raises(ConfigError, match="fields"):
        load_config(_write(tmp_path, MINIMAL + "\n[fields]\ngamma = 1.0\n"))


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError, match="gamm"):
        load_config(_write(tmp_path, MINIMAL + "\n[particle]\ngamm = 1.0\n"))


def test_seeds_are_required(tmp_path):
    text = MINIMAL.replace("seed_real = 1\n", "")
    with pytest.raises(ConfigError, match="seed_real"):
        load_config(_write(tmp_path, text))
    text = MINIMAL.replace("seed_fict = 2\n", "")
    with pytest.raises(ConfigError, match="seed_fict"):
        load_config(_write(tmp_path, text))


def test_booleans_are_not_numbers(tmp_path):
    text = MINIMAL.replace("dt = 1e-3", "dt = true")
    with pytest.raises(ConfigError, match="dt"):
        load_config(_write(tmp_path, text))


def test_type_errors_are_rejected(tmp_path):
    text = MINIMAL.replace('model = "particle"', "model = 3")
    with pytest.raises(ConfigError, match="model"):
        load_config(_write(tmp_path, text))
    text = MINIMAL.replace("n_paths = 100", "n_paths = 100.5")
    with pytest.raises(ConfigError, match="n_paths"):
        load_config(_write(tmp_path, text))


@pytest.mark.parametrize(
    "replacement, pattern",
    [
        (('model = "particle"', 'model = "fluid"'), "model"),
        (("dt = 1e-3", "dt = 0.0"), "dt"),
        (("t_final = 1.0", "t_final = -1.0"), "t_final"),
        (("sample_interval = 0.5", "sample_interval = 0.0"), "sample_interval"),
        (("n_paths = 100", "n_paths = 0"), "n_paths"),
        (("seed_real = 1", "seed_real = -4"), "seed"),
    ],
)
def test_run_section_validation(tmp_path, replacement, pattern):
    old, new = replacement
    with pytest.raises(ConfigError, match=pattern):
        load_config(_write(tmp_path, MINIMAL.replace(old, new)))


def test_extra_run_options(tmp_path):
    text = MINIMAL + (
        "n_realizations = 4\n"
        "breed_tolerance = 1e-3\n"
        "fixed_point_iterations = 6\n"
        'divergence_policy = "recycle"\n'
    )
    config = load_config(_write(tmp_path, text))
    assert config.n_realizations == 4
    assert config.breed_tolerance == 1e-3
    assert config.fixed_point_iterations == 6
    assert config.divergence_policy == "recycle"
    with pytest.raises(ConfigError, match="breed_tolerance"):
        load_config(_write(tmp_path, MINIMAL + "breed_tolerance = 1.5\n"))
    with pytest.raises(ConfigError, match="divergence_policy"):
        load_config(_write(tmp_path, MINIMAL + 'divergence_policy = "crash"\n'))


def test_model_sections_flow_into_params(tmp_path):
    text = MINIMAL + """
[particle]
gamma = 0.5
k_p = -0.7
x0 = 1.25

[field]
gamma = 0.01
modes = 16
box_length = 12.0
N = 2.0
weight_mode = "complex"

[grid]
n_x = 128
n_p = 64
half_width = 6.0
"""
    config = load_config(_write(tmp_path, text))
    assert config.particle.gamma == 0.5
    assert config.particle.feedback_gain == -0.7
    assert config.particle.x0 == 1.25
    assert config.field.gamma == 0.01
    assert config.field.modes == 16
    assert config.field.box_length == 12.0
    assert config.field.n_atoms == 2.0
    assert config.field.weight_mode == "complex"
    assert config.field.dt == config.dt
    assert config.grid.n_x == 128
    assert config.grid.n_p == 64
    assert config.grid.half_width == 6.0


def test_model_param_validation_becomes_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, MINIMAL + "\n[field]\nmodes = 20\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, MINIMAL + "\n[particle]\ngamma = -1.0\n"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, MINIMAL + "\n[grid]\nn_x = 4\n"))


def test_override_seeds(tmp_path):
    config = load_config(_write(tmp_path, MINIMAL))
    same = override_seeds(config, None, None)
    assert same is config
    changed = override_seeds(config, 77, None)
    assert changed.seed_real == 77 and changed.seed_fict == 2
    changed = override_seeds(config, None, 88)
    assert changed.seed_fict == 88 and changed.seed_real == 1
    with pytest.raises(ConfigError):
        override_seeds(config, -1, None)


def test_canonical_echo_contents(tmp_path):
    config = load_config(_write(tmp_path, MINIMAL))
    echo = canonical_echo(config)
    assert echo["run.model"] == "particle"
    assert echo["run.seed_real"] == 1
    assert echo["run.seed_fict"] == 2
    assert echo["particle.gamma"] == 1.0
    # no output or thread entries: replays must echo identically
    assert not any("out" in key or "thread" in key or "replay" in key for key in echo)
    # particle run omits field-only entries by default
    assert not any(key.startswith("field.") for key in echo)
    field_config = load_config(
        _write(tmp_path, MINIMAL.replace('model = "particle"', 'model = "field"'))
    )
    field_echo = canonical_echo(field_config)
    assert field_echo["field.gamma"] == 1.0
    assert not any(key.startswith("particle.") for key in field_echo)


def test_canonical_echo_explicit_sections(tmp_path):
    config = load_config(_write(tmp_path, MINIMAL))
    grid_only = canonical_echo(config, sections=("grid",))
    assert grid_only["grid.n_x"] == 256
    assert not any(key.startswith("particle.") for key in grid_only)
    both = canonical_echo(config, sections=("particle", "grid"))
    assert both["grid.half_width"] == 8.0
    assert both["particle.gamma"] == 1.0
    assert both["run.model"] == "particle"
