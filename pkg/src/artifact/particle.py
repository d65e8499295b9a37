"""Trapped particle under continuous position measurement with feedback.

Oscillator units throughout (unit mass, unit trap frequency, hbar = 1). The
state per trajectory is ``(x, p)``. With measurement strength ``gamma`` and a
control ``u`` proportional to the ensemble-mean momentum, the weighted
trajectory equations (Stratonovich) are::

    dx = p dt
    dp = -(x - u) dt + sqrt(gamma) dV
    d(log w) = -2 gamma (x - mean_x)^2 dt + 2 sqrt(gamma) x dW

``dW`` is the shared measurement noise, ``dV`` the per-trajectory fictitious
noise, and ``mean_x`` the weighted ensemble mean frozen at the step start.
The damping feedback ``u = gain * mean_p`` cools the particle for negative
gain of modest magnitude.

Because the model is linear with Gaussian initial conditions, the exact
conditional moments solve a Kalman-Bucy filter. :func:`gaussian_filter_reference`
integrates that filter along a given measurement record and serves as an
independent oracle for the trajectory engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.integrate import solve_ivp

from .core import FeedbackContext, NoiseSpec
from .ensemble import (
    family_stderr,
    family_variance_stderr,
    weighted_average,
    weighted_variance,
)

DEFAULT_X0 = float(np.sqrt(5.0))


@dataclass(frozen=True)
class ParticleParams:
    """Physical and numerical parameters of the measured particle.

    ``x0`` displaces the initial Gaussian (vacuum-width) wavepacket along x,
    so the initial mean energy is ``x0**2 / 2 + 1/2`` (3.0 for the default
    ``x0 = sqrt(5)``).
    """

    gamma: float = 1.0
    feedback_gain: float = -1.35
    x0: float = DEFAULT_X0
    dt: float = 1e-3

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")


class ParticleModel:
    """Coefficient model for the measured, feedback-cooled particle."""

    csv_columns = ("energy", "energy_stderr", "x_mean", "p_mean", "var_x", "var_p")
    csv_extra_columns = ()

    def __init__(self, params: ParticleParams) -> None:
        self.params = params
        self.dim = 2
        self.noise = NoiseSpec(n_real=1, n_fict=1, dt=params.dt)
        root_gamma = np.sqrt(params.gamma)
        self._fict = np.array([[0.0], [root_gamma]], dtype=np.complex128)
        self._beta_scale = 2.0 * root_gamma

    def drift(self, states, t, context):
        x = states[:, 0]
        p = states[:, 1]
        return np.stack([p, -(x - context.control)], axis=1)

    def real_coupling(self, states, t, context):
        return None

    def fict_coupling(self, states, t, context):
        return self._fict

    def weight_drift(self, states, t, context):
        dx = states[:, 0] - context.means["x"]
        return -2.0 * self.params.gamma * dx * dx

    def weight_coupling(self, states, t, context):
        return self._beta_scale * states[:, 0:1]

    def feedback_values(self, states):
        return {"x": states[:, 0], "p": states[:, 1]}

    def control(self, means: Mapping[str, complex]) -> float:
        return self.params.feedback_gain * complex(means["p"]).real

    def sample_initial(self, n_paths: int, rng: np.random.Generator) -> np.ndarray:
        draws = rng.standard_normal((n_paths, 2)) * np.sqrt(0.5)
        draws[:, 0] += self.params.x0
        return draws.astype(np.complex128)

    def summarize(self, states, log_weights, context) -> dict[str, float]:
        x = states[:, 0].real
        p = states[:, 1].real
        energy = 0.5 * (x * x + p * p)
        ancestors = getattr(context, "ancestors", None)
        e_mean = weighted_average(log_weights, energy)
        x_mean = weighted_average(log_weights, x)
        p_mean = weighted_average(log_weights, p)
        var_x = weighted_variance(log_weights, x)
        var_p = weighted_variance(log_weights, p)
        e_err = family_stderr(log_weights, energy, ancestors)
        x_err = family_stderr(log_weights, x, ancestors)
        p_err = family_stderr(log_weights, p, ancestors)
        vx_err = family_variance_stderr(log_weights, x, ancestors)
        vp_err = family_variance_stderr(log_weights, p, ancestors)
        return {
            "energy": float(np.real(e_mean)),
            "energy_stderr": e_err,
            "x_mean": float(np.real(x_mean)),
            "p_mean": float(np.real(p_mean)),
            "var_x": var_x,
            "var_p": var_p,
            "x_mean_stderr": x_err,
            "p_mean_stderr": p_err,
            "var_x_stderr": vx_err,
            "var_p_stderr": vp_err,
        }


def steady_state_covariance(gamma: float) -> tuple[float, float, float]:
    """Fixed point ``(var_x, var_p, cov_xp)`` of the conditional covariance.

    Closed form of the Riccati flow integrated by the filter; the conditional
    state it describes is pure: ``var_x * var_p - cov_xp**2 == 1/4``.
    """
    if gamma <= 0.0:
        raise ValueError("the covariance has a fixed point only for gamma > 0")
    cov = (-1.0 + np.sqrt(1.0 + 4.0 * gamma * gamma)) / (4.0 * gamma)
    var_x = np.sqrt(cov / (2.0 * gamma))
    var_p = var_x * (1.0 + 4.0 * gamma * cov)
    return float(var_x), float(var_p), float(cov)


def _covariance_rhs(t, v, gamma):
    var_x, var_p, cov = v
    return (
        2.0 * cov - 4.0 * gamma * var_x * var_x,
        -2.0 * cov + gamma - 4.0 * gamma * cov * cov,
        var_p - var_x - 4.0 * gamma * var_x * cov,
    )


def gaussian_filter_reference(
    params: ParticleParams,
    real_increments: np.ndarray,
    mean0: tuple[float, float] | None = None,
    cov0: tuple[float, float, float] = (0.5, 0.5, 0.0),
    controls: np.ndarray | None = None,
) -> dict[str, np.ndarray]:
    """Exact conditional moments along a given measurement record.

    The conditional distribution of the linear model stays Gaussian, with
    covariance obeying an autonomous Riccati flow and means driven by the
    record (Ito form)::

        d mean_x = mean_p dt            + 2 sqrt(gamma) var_x  dW
        d mean_p = -(mean_x - u) dt     + 2 sqrt(gamma) cov_xp dW
        d var_x / dt = 2 cov_xp - 4 gamma var_x^2
        d var_p / dt = -2 cov_xp + gamma - 4 gamma cov_xp^2
        d cov_xp / dt = var_p - var_x - 4 gamma var_x cov_xp

    The control is frozen at each step start and the means advance by the
    same implicit-midpoint map the trajectory engine uses, so the two share
    discretization conventions and differ only by sampling error.

    Parameters
    ----------
    real_increments : (n_steps, 1) or (n_steps,) measurement record
    mean0 : initial means; defaults to ``(params.x0, 0)``
    cov0 : initial ``(var_x, var_p, cov_xp)``
    controls : optional (n_steps,) sequence of applied feedback values. Pass
        the ``controls`` recorded by the run being checked: a feedback loop
        closed on a sampled estimate applies slightly different controls than
        one closed on the exact moments, and that difference feeds back into
        the means. Omitted, the filter closes the loop on its own mean,
        ``u = gain * mean_p``, describing an idealized controller instead.

    Returns
    -------
    dict with ``times``, ``mean_x``, ``mean_p``, ``var_x``, ``var_p``,
    ``cov_xp`` and ``energy`` (all length ``n_steps + 1``), where energy is
    ``(mean_x^2 + mean_p^2 + var_x + var_p) / 2``.
    """
    record = np.asarray(real_increments, dtype=np.float64).reshape(-1)
    n_steps = record.size
    dt = params.dt
    gamma = params.gamma
    gain = params.feedback_gain
    if mean0 is None:
        mean0 = (params.x0, 0.0)
    if controls is not None:
        controls = np.asarray(controls, dtype=np.float64).reshape(-1)
        if controls.size != n_steps:
            raise ValueError(f"need {n_steps} control values, got {controls.size}")

    t_final = n_steps * dt
    times = dt * np.arange(n_steps + 1)
    if gamma > 0.0 and n_steps > 0:
        solution = solve_ivp(
            _covariance_rhs,
            (0.0, t_final),
            cov0,
            args=(gamma,),
            dense_output=True,
            rtol=1e-12,
            atol=1e-14,
            max_step=max(dt, t_final / 16.0),
        )
        if not solution.success:
            raise RuntimeError(f"covariance integration failed: {solution.message}")
        cov_at = solution.sol
    else:

        def cov_at(t):
            return _rotated_covariance(cov0, t)

    covs = np.stack([np.asarray(cov_at(t)) for t in times], axis=0)
    mids = np.stack([np.asarray(cov_at(t + 0.5 * dt)) for t in times[:-1]], axis=0) if n_steps else np.zeros((0, 3))

    half = 0.5 * dt
    det = 1.0 + half * half
    root_gamma = np.sqrt(gamma)
    means = np.empty((n_steps + 1, 2))
    means[0] = mean0
    m = np.array(mean0, dtype=np.float64)
    for k in range(n_steps):
        u = gain * m[1] if controls is None else controls[k]
        kick = 2.0 * root_gamma * record[k]
        rhs_x = m[0] + 0.5 * kick * mids[k, 0]
        rhs_p = m[1] + half * u + 0.5 * kick * mids[k, 2]
        mid_x = (rhs_x + half * rhs_p) / det
        mid_p = (rhs_p - half * rhs_x) / det
        m = np.array([2.0 * mid_x - m[0], 2.0 * mid_p - m[1]])
        means[k + 1] = m

    energy = 0.5 * (means[:, 0] ** 2 + means[:, 1] ** 2 + covs[:, 0] + covs[:, 1])
    return {
        "times": times,
        "mean_x": means[:, 0],
        "mean_p": means[:, 1],
        "var_x": covs[:, 0],
        "var_p": covs[:, 1],
        "cov_xp": covs[:, 2],
        "energy": energy,
    }


def _rotated_covariance(cov0, t):
    """gamma = 0 limit: the covariance simply rotates with the trap."""
    var_x0, var_p0, cov0_xp = cov0
    c = np.cos(t)
    s = np.sin(t)
    var_x = c * c * var_x0 + s * s * var_p0 + 2.0 * s * c * cov0_xp
    var_p = s * s * var_x0 + c * c * var_p0 - 2.0 * s * c * cov0_xp
    cov = (var_p0 - var_x0) * s * c + (c * c - s * s) * cov0_xp
    return np.array([var_x, var_p, cov])
