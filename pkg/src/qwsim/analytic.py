"""Closed-form reference solutions and error metrics.

These are the independent references the solvers are measured against:
plane waves, the harmonic-oscillator coherent state, spreading Gaussian
packets, Hermite cross-sectional modes, and the exact transient scattering
state of a straight parabolic guide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite

from .errors import NumericalError
from .units import HBAR, MSTAR


@dataclass(frozen=True)
class PlaneWave:
    k: float

    def __call__(self, x, t: float = 0.0):
        omega = HBAR * self.k**2 / (2.0 * MSTAR)
        return np.exp(1j * (self.k * np.asarray(x) - omega * t))


@dataclass(frozen=True)
class CoherentState:
    """Gaussian riding the classical trajectory of a harmonic oscillator."""

    omega: float  # 1/ps
    x0: float

    def __call__(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        a = MSTAR * self.omega / HBAR
        rot = np.exp(-1j * self.omega * t)
        return (a / math.pi) ** 0.25 * np.exp(
            -0.5
            * a
            * (x * x - 2.0 * x * self.x0 * rot + 0.5 * self.x0**2 * rot * rot + 0.5 * self.x0**2)
            - 0.5j * self.omega * t
        )


@dataclass(frozen=True)
class GaussianPacket:
    """Free spreading Gaussian with mean momentum ``hbar k_p``."""

    sigma: float
    x0: float
    k_p: float

    @property
    def tau(self) -> float:
        return 2.0 * MSTAR * self.sigma**2 / HBAR

    def __call__(self, x, t: float = 0.0):
        x = np.asarray(x, dtype=float)
        w = 1.0 + 1j * t / self.tau
        return w**-0.5 * np.exp(
            (
                -(((x - self.x0) / (2.0 * self.sigma)) ** 2)
                + 1j * self.k_p * (x - self.x0)
                - 1j * self.sigma**2 * self.k_p**2 * t / self.tau
            )
            / w
        )


def three_gaussian_packet(x, t: float = 0.0, sigma: float = 7.5, x0: float = 60.0,
                          energies=(0.0, 25.0, 75.0)):
    """Superposition of three Gaussians with the stated mean energies."""
    out = np.zeros(np.shape(x), dtype=np.complex128)
    for e in energies:
        kp = math.sqrt(2.0 * MSTAR * e) / HBAR
        out = out + GaussianPacket(sigma, x0, kp)(x, t)
    return out


@dataclass(frozen=True)
class HermiteMode:
    """Cross-sectional eigenstate of the parabolic guide, centered at L2/2."""

    n: int
    omega: float
    L2: float

    @property
    def energy(self) -> float:
        return HBAR * self.omega * (self.n + 0.5)

    def __call__(self, x2):
        x = np.asarray(x2, dtype=float) - self.L2 / 2.0
        a = MSTAR * self.omega / HBAR
        norm = (a / math.pi) ** 0.25 / math.sqrt(2.0**self.n * math.factorial(self.n))
        return norm * eval_hermite(self.n, np.sqrt(a) * x) * np.exp(-0.5 * a * x * x)


@dataclass(frozen=True)
class GuideTransient:
    """Exact transient scattering state of the straight parabolic guide."""

    e_kin: float
    omega_star: float
    L2: float
    mode: int = 0

    def __call__(self, x1, x2, t: float = 0.0):
        chi = HermiteMode(self.mode, self.omega_star, self.L2)
        e_total = self.e_kin + chi.energy
        k = math.sqrt(2.0 * MSTAR * self.e_kin) / HBAR
        omega = e_total / HBAR
        x1 = np.asarray(x1, dtype=float)
        return np.exp(1j * (k * x1 - omega * t))[..., None] * chi(x2)[None, :]


def relative_error(field: np.ndarray, reference: np.ndarray, weights=None) -> float:
    """dx-weighted relative l2 error over a region.

    With equidistant weights the dx factors cancel; ``weights`` is only
    needed for non-flat region masks.
    """
    field = np.asarray(field).ravel()
    reference = np.asarray(reference).ravel()
    if field.shape != reference.shape:
        raise NumericalError("field/reference shape mismatch")
    if weights is None:
        ref_norm = np.linalg.norm(reference)
        if ref_norm == 0.0:
            raise NumericalError("zero reference norm")
        return float(np.linalg.norm(field - reference) / ref_norm)
    w = np.sqrt(np.asarray(weights, dtype=float).ravel())
    ref_norm = np.linalg.norm(w * reference)
    if ref_norm == 0.0:
        raise NumericalError("zero reference norm")
    return float(np.linalg.norm(w * (field - reference)) / ref_norm)
