"""Exact dense-matrix reference for the measured lattice field model.

This integrates the conditional master equation for bosons on a tiny periodic
lattice in a truncated Fock space, driven by the same measurement record the
trajectory engine consumes.  It is independent of the package under test: the
Hilbert space is the full many-body one (all occupation patterns with total
atom number up to ``nmax``), the Hamiltonian is second-quantized from the
spectral kinetic matrix plus the harmonic well, and the position-sum coupling
``X = sum_j x_j n_j`` is diagonal in the site-Fock basis.

One step of duration ``dt`` with measurement increment ``dw`` applies a Strang
split ``U(dt/2) G U(dt/2)`` where ``U`` is the exact unitary for the current
feedback field and ``G`` is the exact Gaussian measurement Kraus operator
``exp(sqrt(g) X dy - g X^2 dt)`` with innovation ``dy = dw + 2 sqrt(g) <X> dt``.
Both factors are positivity-preserving, so the state stays a density matrix for
any step size; normalization implements the nonlinear conditioning term.

Costs grow combinatorially with sites and ``nmax``; keep it at 4 sites and a
handful of atoms.  It exists to validate the low-dimensional weighted-pair
unravelling on small cases, not to be fast.
"""

from __future__ import annotations

import math
from itertools import product as iproduct

import numpy as np
from scipy.linalg import expm


def build_space(m: int, nmax: int):
    """All occupation tuples over ``m`` sites with total atom number <= nmax."""
    states = [s for s in iproduct(range(nmax + 1), repeat=m) if sum(s) <= nmax]
    index = {s: i for i, s in enumerate(states)}
    return states, index


def ladder(states, index, site: int) -> np.ndarray:
    """Annihilation operator for one site in the truncated occupation basis."""
    d = len(states)
    op = np.zeros((d, d))
    for i, s in enumerate(states):
        if s[site] > 0:
            t = list(s)
            t[site] -= 1
            op[index[tuple(t)], i] = np.sqrt(s[site])
    return op


class FockReference:
    """Conditional many-body state on a tiny lattice, stepped exactly."""

    def __init__(
        self,
        sites: int = 4,
        box: float = 4.0,
        nmax: int = 4,
        gamma: float = 1.0,
        gain: float = -1.35,
        x0: float = 0.5,
        n_atoms: float = 1.0,
    ) -> None:
        self.gamma = gamma
        self.gain = gain
        dx = box / sites
        x = -0.5 * box + dx * np.arange(sites)
        k = 2.0 * np.pi * np.fft.fftfreq(sites, dx)
        basis = np.fft.fft(np.eye(sites), axis=0)
        kin1 = np.real_if_close(np.fft.ifft(0.5 * (k * k)[:, None] * basis, axis=0))
        mom1 = np.fft.ifft(k[:, None] * basis, axis=0)
        states, index = build_space(sites, nmax)
        self.dim = len(states)
        a = [ladder(states, index, j) for j in range(sites)]
        self.X = sum(x[j] * a[j].T @ a[j] for j in range(sites))
        self.H0 = sum(
            (kin1[i, j] + (0.5 * x[i] ** 2) * (i == j)) * a[i].T @ a[j]
            for i in range(sites)
            for j in range(sites)
        )
        self.P = sum(
            mom1[i, j] * a[i].T @ a[j] for i in range(sites) for j in range(sites)
        )
        self.N = sum(a[j].T @ a[j] for j in range(sites))
        env = np.exp(-0.5 * (x - x0) ** 2)
        alpha = env * np.sqrt(n_atoms / (env * env).sum())
        vec = np.zeros(self.dim, complex)
        for i, s in enumerate(states):
            amp = 1.0
            for j in range(sites):
                amp *= alpha[j] ** s[j] / np.sqrt(float(math.factorial(s[j])))
            vec[i] = amp
        vec *= np.exp(-0.5 * (alpha**2).sum())
        self.rho = np.outer(vec, vec.conj())
        norm = np.trace(self.rho).real
        self.truncation_loss = 1.0 - norm
        self.rho /= norm
        self.x = x
        self.dx = dx
        self._x_diag = np.diag(self.X).real.copy()

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.rho))

    @property
    def mean_x(self) -> float:
        return self.expect(self.X).real

    @property
    def mean_p(self) -> float:
        return self.expect(self.P).real

    @property
    def number(self) -> float:
        return self.expect(self.N).real

    @property
    def energy(self) -> float:
        return self.expect(self.H0).real

    def step(self, dt: float, dw: float) -> None:
        g = self.gamma
        u = self.gain * self.mean_p
        half = expm(-1j * (self.H0 - u * self.X) * (0.5 * dt))
        dy = dw + 2.0 * np.sqrt(g) * self.mean_x * dt
        kraus = np.exp(np.sqrt(g) * self._x_diag * dy - g * self._x_diag**2 * dt)
        rho = half @ self.rho @ half.conj().T
        rho = kraus[:, None] * rho * kraus[None, :]
        rho = half @ rho @ half.conj().T
        self.rho = rho / np.trace(rho).real
