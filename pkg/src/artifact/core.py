"""Stochastic stepping core for weighted trajectory ensembles.

A model supplies drift and noise-coupling coefficients for a batch of
low-dimensional complex states together with drift and coupling terms for the
log-weight each trajectory carries. Two kinds of noise drive a step:

* *real* (measurement) increments, one shared vector per step for the whole
  ensemble, because every trajectory conditions on the same measurement
  record;
* *fictitious* increments, drawn independently per trajectory, which realise
  the diffusive part of the underlying distribution dynamics.

All equations are integrated in Stratonovich form with a semi-implicit
midpoint rule: the midpoint state is found by fixed-point iteration, the step
is completed by reflection through the midpoint, and the log-weight increment
is evaluated at the midpoint state. Ensemble-level quantities entering the
coefficients (weighted means, the feedback control) are frozen at the start
of the step inside a :class:`FeedbackContext`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Protocol

import numpy as np


class DivergenceError(RuntimeError):
    """A trajectory produced a non-finite state or weight."""


@dataclass(frozen=True)
class NoiseSpec:
    """Shape and step size of the noise driving a model.

    Attributes
    ----------
    n_real : int
        Number of shared measurement-noise channels.
    n_fict : int
        Number of per-trajectory fictitious-noise channels.
    dt : float
        Time step; every increment is zero-mean normal with variance ``dt``.
    """

    n_real: int
    n_fict: int
    dt: float

    def __post_init__(self) -> None:
        if self.n_real < 0 or self.n_fict < 0:
            raise ValueError("noise channel counts must be nonnegative")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class NoiseIncrements:
    """Gaussian increments for one step.

    ``real`` has shape ``(n_real,)`` and is shared by every trajectory.
    ``fict`` has shape ``(n_paths, n_fict)`` for a batch, or ``(n_fict,)``
    for a single trajectory.
    """

    real: np.ndarray
    fict: np.ndarray


@dataclass(frozen=True)
class FeedbackContext:
    """Ensemble information frozen at the start of a step.

    ``means`` holds the weighted means the model asked for (complex scalars),
    ``control`` the feedback control value computed from them. ``ancestors``
    optionally labels each trajectory with its founding ancestor so standard
    errors can account for trajectories cloned from a common parent.
    """

    means: Mapping[str, complex]
    control: float
    ancestors: np.ndarray | None = None


class CoefficientModel(Protocol):
    """Coefficient supplier for one physical model.

    States form a complex array of shape ``(n_paths, dim)``. Coupling methods
    may return ``None`` for an absent term, a ``(dim, k)`` array when the
    coupling is state independent, or a ``(n_paths, dim, k)`` array.
    """

    dim: int
    noise: NoiseSpec
    csv_columns: tuple[str, ...]

    def drift(self, states: np.ndarray, t: float, context: FeedbackContext) -> np.ndarray:
        """Deterministic state drift, shape ``(n_paths, dim)``."""

    def real_coupling(
        self, states: np.ndarray, t: float, context: FeedbackContext
    ) -> np.ndarray | None:
        """Coupling of the state to the shared measurement noise."""

    def fict_coupling(
        self, states: np.ndarray, t: float, context: FeedbackContext
    ) -> np.ndarray | None:
        """Coupling of the state to the per-trajectory fictitious noise."""

    def weight_drift(self, states: np.ndarray, t: float, context: FeedbackContext) -> np.ndarray:
        """Log-weight drift, shape ``(n_paths,)``."""

    def weight_coupling(
        self, states: np.ndarray, t: float, context: FeedbackContext
    ) -> np.ndarray | None:
        """Log-weight coupling to the measurement noise, ``(n_paths, n_real)``."""

    def feedback_values(self, states: np.ndarray) -> dict[str, np.ndarray]:
        """Per-trajectory values whose weighted means feed the control."""

    def control(self, means: Mapping[str, complex]) -> float:
        """Feedback control computed from the weighted means."""

    def sample_initial(self, n_paths: int, rng: np.random.Generator) -> np.ndarray:
        """Draw the initial state batch, shape ``(n_paths, dim)`` complex."""

    def summarize(
        self, states: np.ndarray, log_weights: np.ndarray, context: FeedbackContext
    ) -> dict[str, float]:
        """Weighted observables for one sample time, keyed by column name."""


def generate_increments(
    rng_real: np.random.Generator,
    rng_fict: np.random.Generator,
    spec: NoiseSpec,
) -> NoiseIncrements:
    """Draw one trajectory's noise increments for a single step.

    Both blocks are i.i.d. zero-mean normal with variance ``spec.dt``. The
    two generators are independent streams, so real and fictitious blocks are
    uncorrelated by construction.
    """
    root = np.sqrt(spec.dt)
    real = root * rng_real.standard_normal(spec.n_real)
    fict = root * rng_fict.standard_normal(spec.n_fict)
    return NoiseIncrements(real=real, fict=fict)


def _apply_coupling(coeff: np.ndarray | None, inc: np.ndarray):
    """Contract a coupling array with an increment vector.

    ``coeff`` is ``None`` (no term), ``(dim, k)`` shared across the batch, or
    ``(n_paths, dim, k)``; ``inc`` is ``(k,)`` shared or ``(n_paths, k)``.
    Returns ``0.0`` or an array broadcastable to ``(n_paths, dim)``.
    """
    if coeff is None:
        return 0.0
    if coeff.shape[-1] == 0:
        return 0.0
    if coeff.ndim == 2:
        return inc @ coeff.T
    if inc.ndim == 1:
        return coeff @ inc
    return np.einsum("pdk,pk->pd", coeff, inc)


def step_paths(
    model: CoefficientModel,
    states: np.ndarray,
    log_weights: np.ndarray,
    t: float,
    increments: NoiseIncrements,
    context: FeedbackContext,
    iterations: int = 4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance a batch of weighted trajectories by one midpoint step.

    Parameters
    ----------
    states : (n_paths, dim) complex array
    log_weights : (n_paths,) complex array
    t : time at the start of the step
    increments : noise increments for this step
    context : ensemble context frozen at the step start
    iterations : fixed-point iterations for the implicit midpoint state

    Returns
    -------
    (new_states, new_log_weights, diverged)
        ``diverged`` is a boolean mask marking trajectories whose new state
        or weight is non-finite; the caller decides the policy.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    spec = model.noise
    dt = spec.dt
    t_mid = t + 0.5 * dt
    x0 = np.asarray(states)
    mid = x0
    move = np.zeros_like(x0)
    for _ in range(iterations):
        move = model.drift(mid, t_mid, context) * dt
        move = move + _apply_coupling(
            model.real_coupling(mid, t_mid, context), increments.real
        )
        move = move + _apply_coupling(
            model.fict_coupling(mid, t_mid, context), increments.fict
        )
        mid = x0 + 0.5 * move
    new_states = x0 + move

    dlog = model.weight_drift(mid, t_mid, context) * dt
    coupling = model.weight_coupling(mid, t_mid, context)
    if coupling is not None and spec.n_real > 0:
        dlog = dlog + coupling @ increments.real
    new_log_weights = log_weights + dlog

    with np.errstate(invalid="ignore"):
        diverged = ~np.isfinite(new_states).all(axis=-1) | ~np.isfinite(new_log_weights)
    return new_states, new_log_weights, diverged


def step_trajectory(
    model: CoefficientModel,
    state: np.ndarray,
    log_weight: complex,
    t: float,
    increments: NoiseIncrements,
    context: FeedbackContext,
    iterations: int = 4,
) -> tuple[np.ndarray, complex, bool]:
    """Advance a single weighted trajectory by one midpoint step.

    Thin wrapper over :func:`step_paths`; a non-finite result is flagged in
    the returned boolean, never raised here, so the caller's divergence
    policy stays in charge.
    """
    states = np.atleast_2d(np.asarray(state))
    log_weights = np.asarray([log_weight], dtype=np.complex128)
    new_states, new_log_weights, diverged = step_paths(
        model, states, log_weights, t, increments, context, iterations=iterations
    )
    return new_states[0], complex(new_log_weights[0]), bool(diverged[0])
