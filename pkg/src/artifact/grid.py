"""Dense phase-space solver for the measured particle.

Propagates the full conditional phase-space distribution on a uniform
``(x, p)`` grid, as an independent cross-check of the weighted trajectory
engine. One step of size ``dt`` under a shared measurement increment ``dw``
splits symmetrically:

1. transport by ``dt/2``: free streaming and the harmonic force are applied
   as spectral shears (exact for linear flow), momentum diffusion of strength
   ``gamma/2`` as a spectral multiplier;
2. measurement update: multiply by
   ``exp(-2 gamma ((x - mean_x)^2 - var_x) dt + 2 sqrt(gamma) (x - mean_x) dw)``
   using the current grid moments, then renormalize;
3. transport by the remaining ``dt/2``.

The feedback control ``u`` enters the force shear and is frozen per step by
the caller, mirroring the trajectory engine's frozen context. Renormalization
absorbs the measurement update's norm drift; a drift beyond 10% in a single
step indicates a too-large ``dt * dw`` product and raises
:class:`StepSizeError` instead of propagating a distorted distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import EnsembleSettings, ExperimentRecord
from .particle import ParticleParams


class GridTooSmallError(ValueError):
    """The requested initial state does not fit the grid with negligible tails."""


class StepSizeError(RuntimeError):
    """A single measurement update moved the norm by more than 10%."""


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: ``n_x`` by ``n_p`` points on ``[-half_width, half_width)``."""

    n_x: int = 256
    n_p: int = 256
    half_width: float = 8.0

    def __post_init__(self) -> None:
        if self.n_x < 8 or self.n_p < 8:
            raise ValueError("grid needs at least 8 points per axis")
        if not self.half_width > 0.0:
            raise ValueError("half_width must be positive")


class PhaseSpaceGrid:
    """Conditional phase-space distribution on a periodic uniform grid."""

    def __init__(self, spec: GridSpec, gamma: float) -> None:
        if gamma < 0.0:
            raise ValueError("gamma must be nonnegative")
        self.spec = spec
        self.gamma = gamma
        width = 2.0 * spec.half_width
        self.dx = width / spec.n_x
        self.dp = width / spec.n_p
        self.x = -spec.half_width + self.dx * np.arange(spec.n_x)
        self.p = -spec.half_width + self.dp * np.arange(spec.n_p)
        self.kx = 2.0 * np.pi * np.fft.rfftfreq(spec.n_x, self.dx)
        self.kp = 2.0 * np.pi * np.fft.rfftfreq(spec.n_p, self.dp)
        self.values = np.zeros((spec.n_x, spec.n_p))
        self._cell = self.dx * self.dp

    def initialize_gaussian(
        self,
        mean: tuple[float, float],
        var: tuple[float, float],
        edge_tolerance: float = 1e-9,
    ) -> None:
        """Set a normalized Gaussian and verify it fits the box.

        Raises :class:`GridTooSmallError` when the edge density relative to
        the peak exceeds ``edge_tolerance``.
        """
        mx, mp_ = mean
        vx, vp = var
        gx = np.exp(-((self.x - mx) ** 2) / (2.0 * vx))
        gp = np.exp(-((self.p - mp_) ** 2) / (2.0 * vp))
        values = gx[:, None] * gp[None, :]
        peak = values.max()
        edge = max(
            values[0, :].max(), values[-1, :].max(), values[:, 0].max(), values[:, -1].max()
        )
        if edge > edge_tolerance * peak:
            raise GridTooSmallError(
                f"edge density {edge / peak:.2e} of peak exceeds {edge_tolerance:.1e}; "
                "enlarge half_width"
            )
        self.values = values / (values.sum() * self._cell)

    def norm(self) -> float:
        return float(self.values.sum() * self._cell)

    def moments(self) -> dict[str, float]:
        """Means, variances and mean energy of the current distribution."""
        w = self.values
        total = w.sum()
        wx = w.sum(axis=1)
        wp = w.sum(axis=0)
        x_mean = float(wx @ self.x / total)
        p_mean = float(wp @ self.p / total)
        x2 = float(wx @ (self.x * self.x) / total)
        p2 = float(wp @ (self.p * self.p) / total)
        cov = float((self.x @ w @ self.p) / total) - x_mean * p_mean
        return {
            "x_mean": x_mean,
            "p_mean": p_mean,
            "var_x": x2 - x_mean * x_mean,
            "var_p": p2 - p_mean * p_mean,
            "cov_xp": cov,
            "energy": 0.5 * (x2 + p2),
        }

    def _shear_x(self, tau: float) -> None:
        """Free streaming: values(x, p) <- values(x - p*tau, p)."""
        spectrum = np.fft.rfft(self.values, axis=0)
        phase = np.exp(-1j * np.outer(self.kx, self.p * tau))
        self.values = np.fft.irfft(spectrum * phase, n=self.spec.n_x, axis=0)

    def _shear_p(self, tau: float, u: float, diffuse: bool = True) -> None:
        """Force and diffusion: values(x, p) <- values(x, p + (x-u)*tau), diffused."""
        spectrum = np.fft.rfft(self.values, axis=1)
        phase = np.exp(1j * np.outer((self.x - u) * tau, self.kp))
        if diffuse and self.gamma > 0.0:
            phase = phase * np.exp(-0.5 * self.gamma * tau * self.kp**2)[None, :]
        self.values = np.fft.irfft(spectrum * phase, n=self.spec.n_p, axis=1)

    def transport(self, tau: float, u: float, advect: bool = True) -> None:
        """Symmetrized transport over ``tau``: shear, force + diffusion, shear."""
        if advect:
            self._shear_x(0.5 * tau)
            self._shear_p(tau, u)
            self._shear_x(0.5 * tau)
        elif self.gamma > 0.0:
            spectrum = np.fft.rfft(self.values, axis=1)
            spectrum *= np.exp(-0.5 * self.gamma * tau * self.kp**2)[None, :]
            self.values = np.fft.irfft(spectrum, n=self.spec.n_p, axis=1)

    def measurement_update(self, dt: float, dw: float) -> float:
        """Apply the conditioning factor for one measurement increment.

        Uses the current grid moments for the centering, renormalizes, and
        returns the pre-normalization norm drift (a step-size diagnostic).
        """
        if self.gamma == 0.0:
            return 0.0
        m = self.moments()
        centered = self.x - m["x_mean"]
        exponent = (
            -2.0 * self.gamma * (centered * centered - m["var_x"]) * dt
            + 2.0 * np.sqrt(self.gamma) * centered * dw
        )
        self.values = self.values * np.exp(exponent)[:, None]
        norm = self.norm()
        drift = abs(norm - 1.0)
        if not np.isfinite(norm) or drift > 0.1:
            raise StepSizeError(
                f"measurement update moved the norm by {drift:.2%}; reduce dt"
            )
        self.values /= norm
        return drift

    def step(self, dt: float, dw: float, u: float, advect: bool = True) -> float:
        """One full split step; returns the measurement-update norm drift."""
        self.transport(0.5 * dt, u, advect=advect)
        drift = self.measurement_update(dt, dw)
        self.transport(0.5 * dt, u, advect=advect)
        return drift


def run_grid_experiment(
    params: ParticleParams,
    spec: GridSpec,
    real_increments: np.ndarray,
    t_final: float,
    sample_interval: float,
    controls: np.ndarray | None = None,
) -> ExperimentRecord:
    """Propagate the grid along a measurement record, sampling observables.

    Emits the same column set as the trajectory engine's particle runs so the
    two solvers' outputs are directly comparable; sampling-only columns
    (stderr, ess, breeding counters) are zero for this deterministic solver.

    ``controls`` replays a recorded per-step feedback sequence, so the grid
    reproduces the exact experiment another solver ran (same record, same
    applied control). Omitted, the grid closes the loop on its own momentum
    mean.
    """
    dt = params.dt
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError("t_final must be an integer multiple of dt")
    stride = max(1, int(round(sample_interval / dt)))
    if abs(stride * dt - sample_interval) > 1e-9:
        raise ValueError("sample_interval must be an integer multiple of dt")
    record = np.asarray(real_increments, dtype=np.float64).reshape(-1)
    if record.size != n_steps:
        raise ValueError(f"need {n_steps} increments, got {record.size}")
    if controls is not None:
        controls = np.asarray(controls, dtype=np.float64).reshape(-1)
        if controls.size != n_steps:
            raise ValueError(f"need {n_steps} control values, got {controls.size}")

    grid = PhaseSpaceGrid(spec, params.gamma)
    grid.initialize_gaussian((params.x0, 0.0), (0.5, 0.5))

    def row() -> dict[str, float]:
        m = grid.moments()
        return {
            "energy": m["energy"],
            "energy_stderr": 0.0,
            "x_mean": m["x_mean"],
            "p_mean": m["p_mean"],
            "var_x": m["var_x"],
            "var_p": m["var_p"],
            "ess": 0.0,
            "breed_events": 0.0,
            "removed_weight": 0.0,
        }

    times = [0.0]
    rows = [row()]
    applied = np.zeros(n_steps, dtype=np.float64)
    for k in range(n_steps):
        if controls is None:
            u = params.feedback_gain * grid.moments()["p_mean"]
        else:
            u = controls[k]
        grid.step(dt, record[k], u)
        applied[k] = u
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            times.append((k + 1) * dt)
            rows.append(row())

    columns = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    return ExperimentRecord(
        times=np.array(times),
        columns=columns,
        real_increments=record.reshape(-1, 1),
        dt=dt,
        settings=None,
        controls=applied,
    )
