"""Binary noise records and observable CSV round trips."""

import numpy as np
import pytest

from artifact.records import (
    MAGIC,
    RecordFormatError,
    format_value,
    read_noise_record,
    read_observable_csv,
    write_noise_record,
    write_observable_csv,
)


def test_noise_record_roundtrip(tmp_path):
    path = tmp_path / "noise.bin"
    rng = np.random.Generator(np.random.PCG64(1))
    increments = rng.standard_normal((37, 2)) * 0.01
    write_noise_record(path, increments, dt=2e-3)
    back, dt = read_noise_record(path)
    assert dt == 2e-3
    np.testing.assert_array_equal(back, increments)
    assert back.dtype == np.float64


def test_empty_record_roundtrip(tmp_path):
    path = tmp_path / "noise.bin"
    write_noise_record(path, np.zeros((0, 1)), dt=1e-3)
    back, dt = read_noise_record(path)
    assert back.shape == (0, 1)
    assert dt == 1e-3


def test_noise_record_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError):
        write_noise_record(tmp_path / "x.bin", np.zeros(5), dt=1e-3)


def test_record_format_errors(tmp_path):
    short = tmp_path / "short.bin"
    short.write_bytes(b"NR")
    with pytest.raises(RecordFormatError, match="too short"):
        read_noise_record(short)

    good = tmp_path / "good.bin"
    write_noise_record(good, np.ones((3, 1)), dt=1e-3)
    raw = good.read_bytes()

    bad_magic = tmp_path / "magic.bin"
    bad_magic.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(RecordFormatError, match="magic"):
        read_noise_record(bad_magic)

    bad_version = tmp_path / "version.bin"
    bad_version.write_bytes(MAGIC + (99).to_bytes(4, "little") + raw[8:])
    with pytest.raises(RecordFormatError, match="version"):
        read_noise_record(bad_version)

    truncated = tmp_path / "trunc.bin"
    truncated.write_bytes(raw[:-8])
    with pytest.raises(RecordFormatError, match="expected"):
        read_noise_record(truncated)


def test_format_value():
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(3) == "3"
    assert format_value("field") == "field"
    assert format_value(0.5) == "0.5"
    # 17 significant digits round-trip any double exactly
    for value in (np.pi, 1.0 / 3.0, 2.2360679774997896, 1e-300):
        assert float(format_value(value)) == value


def test_observable_csv_roundtrip(tmp_path):
    path = tmp_path / "obs.csv"
    times = np.array([0.0, 0.5, 1.0])
    columns = {
        "energy": np.array([3.0, 2.5, 1.0 / 3.0]),
        "ess": np.array([100.0, 99.5, 98.0]),
    }
    echo = {"run.model": "particle", "run.dt": 1e-3, "run.flag": True}
    write_observable_csv(path, times, columns, ("energy", "ess"), echo)
    got_echo, got_columns = read_observable_csv(path)
    assert got_echo["run.model"] == "particle"
    assert float(got_echo["run.dt"]) == 1e-3
    assert got_echo["run.flag"] == "true"
    np.testing.assert_array_equal(got_columns["t"], times)
    np.testing.assert_array_equal(got_columns["energy"], columns["energy"])
    np.testing.assert_array_equal(got_columns["ess"], columns["ess"])
    text = path.read_text()
    assert text.splitlines()[0].startswith("#")
    assert "t,energy,ess" in text


def test_observable_csv_is_byte_stable(tmp_path):
    times = np.linspace(0.0, 1.0, 5)
    columns = {"x": np.sqrt(np.arange(5).astype(float))}
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_observable_csv(a, times, columns, ("x",), {"seed": 7})
    write_observable_csv(b, times, columns, ("x",), {"seed": 7})
    assert a.read_bytes() == b.read_bytes()


def test_observable_csv_missing_column(tmp_path):
    with pytest.raises(ValueError, match="missing"):
        write_observable_csv(
            tmp_path / "bad.csv",
            np.array([0.0]),
            {"x": np.array([1.0])},
            ("x", "y"),
            None,
        )
