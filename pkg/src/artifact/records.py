"""File formats: measurement-noise records and observable CSV tables.

The noise record is the exact sequence of shared measurement increments that
drove a realization. Re-running with the same record (and the same config)
reproduces every output byte for byte, which is the replay contract the CLI
exposes.

Binary layout (little endian): 4-byte magic ``NREC``, u32 format version,
u32 channel count, u64 step count, f64 step size, then ``steps * channels``
raw float64 increments in step-major order.

CSV files carry one ``# key = value`` comment line per resolved config entry
before the header row, so every table is self-describing. Floats are written
with ``%.17g``, which round-trips float64 exactly; identical runs therefore
produce identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NREC"
VERSION = 1
_HEADER = struct.Struct("<4sIIQd")


class RecordFormatError(ValueError):
    """The file is not a valid noise record."""


def write_noise_record(path, increments: np.ndarray, dt: float) -> None:
    """Write a measurement record of shape ``(n_steps, n_real)``."""
    increments = np.ascontiguousarray(increments, dtype=np.float64)
    if increments.ndim != 2:
        raise ValueError("increments must be a (n_steps, n_real) array")
    n_steps, n_real = increments.shape
    header = _HEADER.pack(MAGIC, VERSION, n_real, n_steps, float(dt))
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(increments.astype("<f8").tobytes())


def read_noise_record(path) -> tuple[np.ndarray, float]:
    """Read a noise record; returns ``(increments, dt)``.

    Raises :class:`RecordFormatError` on a wrong magic, an unknown version,
    or a payload whose length disagrees with the header.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise RecordFormatError(f"{path}: too short to hold a record header")
    magic, version, n_real, n_steps, dt = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise RecordFormatError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 8 * n_real * n_steps
    if len(raw) != expected:
        raise RecordFormatError(
            f"{path}: expected {expected} bytes for {n_steps}x{n_real} increments, "
            f"got {len(raw)}"
        )
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    return payload.reshape(n_steps, n_real).astype(np.float64), float(dt)


def format_value(value) -> str:
    """Canonical text for CSV cells and config echo lines."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) or isinstance(value, np.floating):
        return format(float(value), ".17g")
    return str(value)


def write_observable_csv(
    path,
    times: np.ndarray,
    columns: dict[str, np.ndarray],
    column_order: tuple[str, ...],
    echo: dict[str, object] | None = None,
) -> None:
    """Write one observable table with config-echo comment lines.

    ``column_order`` fixes the schema; a missing column is an error rather
    than a silently shifted table.
    """
    missing = [name for name in column_order if name not in columns]
    if missing:
        raise ValueError(f"columns missing from record: {missing}")
    lines = []
    if echo:
        lines.extend(f"# {key} = {format_value(value)}" for key, value in echo.items())
    lines.append(",".join(("t",) + tuple(column_order)))
    data = [np.asarray(times)] + [np.asarray(columns[name]) for name in column_order]
    for k in range(len(times)):
        lines.append(",".join(format_value(column[k]) for column in data))
    Path(path).write_text("\n".join(lines) + "\n")


def read_observable_csv(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Read a table written by :func:`write_observable_csv`.

    Returns the echo entries and a mapping of column name to array
    (including ``t``).
    """
    echo: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[float]] = []
    for line in Path(path).read_text().splitlines():
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                echo[key.strip()] = value.strip()
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(cell) for cell in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row")
    table = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
    return echo, {name: table[:, i] for i, name in enumerate(header)}
