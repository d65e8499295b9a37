"""Harmonically trapped bosonic field under center-of-mass measurement.

The field is represented in a doubled phase space by two independent complex
amplitude functions ``phi(x)`` and ``xi(x)`` on a periodic grid (``xi`` plays
the conjugate role but is not constrained to equal ``phi*`` after t=0). With
center-of-mass position ``X = integral x phi xi dx`` and its square-weighted
analogue ``X2 = integral x^2 phi xi dx``, the weighted trajectory equations
(Stratonovich) are::

    dphi = -i (h - u x) phi dt - 2 gamma x (X - mean_X) phi dt
           + sqrt(gamma) x (i phi dV1 + i phi dV2 + phi dW)
    dxi  = +i (h - u x) xi  dt - 2 gamma x (X - mean_X) xi  dt
           + sqrt(gamma) x (-i xi dV1 + i xi dV2 + xi dW)
    d(log w) = -2 gamma (X2 + (X - mean_X)^2) dt + 2 sqrt(gamma) X dW

with ``h = x^2/2 - d^2/dx^2 / 2`` applied spectrally. The opposite
Hamiltonian signs for ``phi`` and ``xi`` keep ``integral phi xi dx``
conserved for gamma = 0 (h is symmetric), which is what statistical particle
number conservation requires; the mixed-sign fictitious couplings implement
the doubled-phase-space diffusion that position measurement induces.

The weight drift and coupling are complex before projection. Their imaginary
parts generate a pure sampling phase: the ensemble-closing mirror symmetry
``(phi, xi) -> (xi*, phi*)`` with ``dV2 -> -dV2`` flips the sign of
``Im(log w)`` increments while preserving all physical observables, so
weighted expectations are real and the default ``weight_mode="real"`` drops
the imaginary parts at the coefficient level. For a long run this is not
merely cosmetic: the phase variance of the complex weights grows linearly in
time and the complex-mode estimator degenerates, while the real projection
stays well conditioned. ``weight_mode="complex"`` retains the full complex
weights for study.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import NoiseSpec
from .ensemble import family_stderr, weighted_average

DEFAULT_X0 = float(np.sqrt(5.0))


@dataclass(frozen=True)
class FieldParams:
    """Physical and numerical parameters of the measured field.

    ``n_atoms`` scales the initial coherent amplitude; ``modes`` is the
    number of spatial grid points (a power of two for the spectral
    transforms); ``box_length`` is the full periodic box size.
    """

    gamma: float = 1.0
    feedback_gain: float = -1.35
    x0: float = DEFAULT_X0
    n_atoms: float = 1.0
    modes: int = 32
    box_length: float = 16.0
    dt: float = 1e-3
    weight_mode: str = "real"

    def __post_init__(self) -> None:
        if self.gamma < 0.0:
            raise ValueError("gamma must be nonnegative")
        if not self.n_atoms > 0.0:
            raise ValueError("n_atoms must be positive")
        if self.modes < 2 or self.modes & (self.modes - 1):
            raise ValueError("modes must be a power of two")
        if not self.box_length > 0.0:
            raise ValueError("box_length must be positive")
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.weight_mode not in ("real", "complex"):
            raise ValueError("weight_mode must be 'real' or 'complex'")


class FieldModel:
    """Coefficient model for the measured, feedback-cooled field."""

    csv_columns = ("energy", "energy_stderr", "x_mean", "p_mean", "var_x", "var_p")
    csv_extra_columns = ("norm", "norm_stderr", "im_X")

    def __init__(self, params: FieldParams) -> None:
        self.params = params
        m = params.modes
        self.dim = 2 * m
        self.noise = NoiseSpec(n_real=1, n_fict=2, dt=params.dt)
        self.dx = params.box_length / m
        self.x = -0.5 * params.box_length + self.dx * np.arange(m)
        k = 2.0 * np.pi * np.fft.fftfreq(m, self.dx)
        modes_eye = np.fft.fft(np.eye(m), axis=0)
        kinetic = np.fft.ifft(0.5 * (k * k)[:, None] * modes_eye, axis=0)
        self._h0 = kinetic + np.diag(0.5 * self.x * self.x)
        self._momentum = np.fft.ifft(k[:, None] * modes_eye, axis=0)
        self._kinetic2 = 2.0 * kinetic
        self._root_gamma = float(np.sqrt(params.gamma))

    def _split(self, states):
        m = self.params.modes
        return states[:, :m], states[:, m:]

    def center_of_mass(self, states) -> np.ndarray:
        """Per-trajectory ``X = integral x phi xi dx`` (complex)."""
        phi, xi = self._split(states)
        return self.dx * np.einsum("j,pj,pj->p", self.x, phi, xi)

    def center_of_mass_sq(self, states) -> np.ndarray:
        """Per-trajectory ``X2 = integral x^2 phi xi dx`` (complex)."""
        phi, xi = self._split(states)
        return self.dx * np.einsum("j,pj,pj->p", self.x * self.x, phi, xi)

    def momentum(self, states) -> np.ndarray:
        """Per-trajectory ``integral xi (-i d/dx) phi dx`` (complex)."""
        phi, xi = self._split(states)
        return self.dx * np.einsum("pj,pj->p", xi, phi @ self._momentum.T)

    def number(self, states) -> np.ndarray:
        """Per-trajectory ``integral phi xi dx`` (complex)."""
        phi, xi = self._split(states)
        return self.dx * np.einsum("pj,pj->p", phi, xi)

    def energy_values(self, states) -> np.ndarray:
        """Per-trajectory ``integral xi h phi dx``, control term excluded."""
        phi, xi = self._split(states)
        return self.dx * np.einsum("pj,pj->p", xi, phi @ self._h0.T)

    def drift(self, states, t, context):
        params = self.params
        phi, xi = self._split(states)
        u = context.control
        h_phi = phi @ self._h0.T - u * (self.x * phi)
        h_xi = xi @ self._h0.T - u * (self.x * xi)
        offset = self.center_of_mass(states) - context.means["X"]
        damping = (-2.0 * params.gamma) * offset[:, None] * self.x
        return np.concatenate(
            [-1j * h_phi + damping * phi, 1j * h_xi + damping * xi], axis=1
        )

    def real_coupling(self, states, t, context):
        if self.params.gamma == 0.0:
            return None
        phi, xi = self._split(states)
        column = self._root_gamma * np.concatenate([self.x * phi, self.x * xi], axis=1)
        return column[:, :, None]

    def fict_coupling(self, states, t, context):
        if self.params.gamma == 0.0:
            return None
        phi, xi = self._split(states)
        a = 1j * self._root_gamma * (self.x * phi)
        b = 1j * self._root_gamma * (self.x * xi)
        coupling = np.empty((states.shape[0], self.dim, 2), dtype=np.complex128)
        m = self.params.modes
        coupling[:, :m, 0] = a
        coupling[:, m:, 0] = -b
        coupling[:, :m, 1] = a
        coupling[:, m:, 1] = b
        return coupling

    def weight_drift(self, states, t, context):
        offset = self.center_of_mass(states) - context.means["X"]
        alpha = (-2.0 * self.params.gamma) * (
            self.center_of_mass_sq(states) + offset * offset
        )
        if self.params.weight_mode == "real":
            return alpha.real
        return alpha

    def weight_coupling(self, states, t, context):
        if self.params.gamma == 0.0:
            return None
        beta = 2.0 * self._root_gamma * self.center_of_mass(states)[:, None]
        if self.params.weight_mode == "real":
            return beta.real
        return beta

    def feedback_values(self, states):
        return {"X": self.center_of_mass(states), "P": self.momentum(states)}

    def control(self, means: Mapping[str, complex]) -> float:
        return self.params.feedback_gain * complex(means["P"]).real

    def sample_initial(self, n_paths: int, rng: np.random.Generator) -> np.ndarray:
        """Coherent initial field: ``phi = xi = sqrt(N) psi0(x - x0)``.

        A coherent state is a point in the doubled phase space, so there is
        nothing stochastic to draw; every trajectory starts identical. The
        amplitude is renormalized on the grid so the initial number is
        ``n_atoms`` to machine precision, and the state must fit the box.
        """
        params = self.params
        envelope = np.exp(-0.5 * (self.x - params.x0) ** 2)
        density = envelope * envelope
        edge = max(density[0], density[-1]) / density.max()
        if edge > 1e-10:
            raise ValueError(
                f"initial state leaks {edge:.2e} of peak density into the box edge; "
                "enlarge box_length"
            )
        amplitude = envelope * np.sqrt(params.n_atoms / (self.dx * density.sum()))
        state = np.concatenate([amplitude, amplitude]).astype(np.complex128)
        return np.tile(state, (n_paths, 1))

    def summarize(self, states, log_weights, context) -> dict[str, float]:
        ancestors = getattr(context, "ancestors", None)
        energy_values = self.energy_values(states)
        number_values = self.number(states)
        energy = weighted_average(log_weights, energy_values)
        number = weighted_average(log_weights, number_values)
        energy_err = family_stderr(log_weights, energy_values, ancestors)
        number_err = family_stderr(log_weights, number_values, ancestors)
        com = weighted_average(log_weights, self.center_of_mass(states))
        mom = weighted_average(log_weights, self.momentum(states))
        x_sq = weighted_average(
            log_weights,
            self.center_of_mass(states) ** 2 + self.center_of_mass_sq(states),
        )
        phi, xi = self._split(states)
        mom_sq_op = self.dx * np.einsum("pj,pj->p", xi, phi @ self._kinetic2.T)
        p_sq = weighted_average(log_weights, self.momentum(states) ** 2 + mom_sq_op)
        x_mean = complex(com).real
        p_mean = complex(mom).real
        return {
            "energy": complex(energy).real,
            "energy_stderr": energy_err,
            "x_mean": x_mean,
            "p_mean": p_mean,
            "var_x": complex(x_sq).real - x_mean * x_mean,
            "var_p": complex(p_sq).real - p_mean * p_mean,
            "norm": complex(number).real,
            "norm_stderr": number_err,
            "im_X": complex(com).imag,
        }
