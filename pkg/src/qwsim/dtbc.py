"""Discrete transparent boundary conditions in one dimension.

Covers the stationary boundary rows built from the solution multipliers
``alpha``, the discrete dispersion relations, the transient convolution
kernel (Legendre form), and the unit-modulus gauge sequences that absorb
constant-in-space, time-dependent lead potentials.  Everything here is
specific to the second-order spatial scheme with Crank-Nicolson stepping;
that is the only combination for which exact discrete truncation holds.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError
from .units import HBAR, MSTAR


# ---------------------------------------------------------------------------
# Dispersion relations


def continuous_k(e_kin: float) -> float:
    """Continuum wave number ``k = sqrt(2 m* E)/hbar``."""
    if e_kin < 0:
        raise NumericalError(f"kinetic energy must be >= 0, got {e_kin}")
    return math.sqrt(2.0 * MSTAR * e_kin) / HBAR


def continuous_energy(k: float) -> float:
    return (HBAR * k) ** 2 / (2.0 * MSTAR)


def discrete_k(e_kin: float, dx: float, order: int = 2) -> float:
    """Wave number of the discrete plane wave at kinetic energy ``e_kin``.

    For the second-order scheme this is the arccos relation; for orders 4
    and 6 the symbol equation is inverted numerically (no closed form).
    """
    if e_kin < 0:
        raise NumericalError(f"kinetic energy must be >= 0, got {e_kin}")
    if order == 2:
        q = MSTAR * (dx / HBAR) ** 2 * e_kin
        if q > 2.0:
            raise NumericalError(
                f"kinetic energy {e_kin} exceeds the second-order band edge "
                f"2*hbar^2/(m* dx^2) = {2.0 * HBAR**2 / (MSTAR * dx**2)}"
            )
        return math.acos(1.0 - q) / dx
    return _discrete_k_higher(e_kin, dx, order)


def _symbol_k2(theta: float, order: int) -> float:
    """-(symbol of D2)*dx^2 at phase ``theta = k dx`` (positive)."""
    if order == 4:
        return (30.0 - 32.0 * math.cos(theta) + 2.0 * math.cos(2 * theta)) / 12.0
    if order == 6:
        return (
            490.0
            - 540.0 * math.cos(theta)
            + 54.0 * math.cos(2 * theta)
            - 4.0 * math.cos(3 * theta)
        ) / 180.0
    raise NumericalError(f"unsupported order {order}")


def _discrete_k_higher(e_kin: float, dx: float, order: int) -> float:
    target = 2.0 * MSTAR * e_kin * dx**2 / HBAR**2
    peak = _symbol_k2(math.pi, order)
    if target > peak:
        raise NumericalError(
            f"kinetic energy {e_kin} exceeds the order-{order} band edge"
        )
    if target == 0.0:
        return 0.0
    theta = brentq(lambda t: _symbol_k2(t, order) - target, 0.0, math.pi)
    return theta / dx


def discrete_energy(k: float, dx: float) -> float:
    """Inverse of :func:`discrete_k` for the second-order scheme."""
    return (1.0 - math.cos(k * dx)) * HBAR**2 / (MSTAR * dx**2)


def discrete_omega(energy: float, dt: float) -> float:
    """Discrete frequency ``omega = (2/dt) arctan(E dt / (2 hbar))``."""
    return 2.0 / dt * math.atan(energy * dt / (2.0 * HBAR))


# ---------------------------------------------------------------------------
# Stationary boundary rows


def stationary_alpha(e_kin: float, dx: float) -> complex:
    """Solution multiplier of the discrete stationary lead equation.

    Returns the branch with ``|alpha| = 1`` (propagating, positive phase
    velocity) for kinetic energies inside the band, and the decaying branch
    ``|alpha| < 1`` for evanescent kinetic energies (negative or beyond the
    band edge).
    """
    q = MSTAR * e_kin * dx**2 / HBAR**2
    disc = 2.0 * q - q * q
    if disc >= 0.0:
        return complex(1.0 - q, math.sqrt(disc))
    root = math.sqrt(-disc)
    lo = (1.0 - q) - root
    hi = (1.0 - q) + root
    return complex(lo if abs(lo) <= abs(hi) else hi, 0.0)


def stationary_dtbc_rows(alpha_l: complex, alpha_r: complex, a_amp: complex = 1.0):
    """Boundary rows for the stationary scattering problem (left injection).

    Left row couples ``(phi_0, phi_1)`` with inhomogeneity
    ``a_amp (1 - alpha_l^2)``; right row couples ``(phi_{J-1}, phi_J)``
    homogeneously.
    """
    left = ({0: 1.0 + 0.0j, 1: -alpha_l}, a_amp * (1.0 - alpha_l * alpha_l))
    right = ({-2: alpha_r, -1: -1.0 + 0.0j}, 0.0 + 0.0j)
    return left, right


# ---------------------------------------------------------------------------
# Transient convolution kernel


class ConvolutionKernel:
    """Coefficients ``s^(n)`` of the transient boundary convolution.

    Built from the Crank-Nicolson parameters through
    ``R = 4 m* dx^2/(hbar dt)``; the Legendre values are produced by the
    stable upward three-term recurrence (|P_n(mu)| <= 1 for mu in [0, 1)).
    The coefficient array grows on demand.
    """

    def __init__(self, dx: float, dt: float, n_max: int = 256):
        self.dx = dx
        self.dt = dt
        self.R = 4.0 * MSTAR * dx**2 / (HBAR * dt)
        self.phi = math.atan2(4.0, self.R)
        self.mu = self.R / math.sqrt(self.R**2 + 16.0)
        self.alpha = (
            0.5j
            * (self.R**2 * (self.R**2 + 16.0)) ** 0.25
            * np.exp(0.5j * self.phi)
        )
        self._p = [1.0, self.mu]  # Legendre values P_n(mu)
        self._s = np.zeros(0, dtype=np.complex128)
        self.extend(n_max)

    def extend(self, n_max: int) -> None:
        if n_max < len(self._s):
            return
        while len(self._p) <= n_max:
            n = len(self._p) - 1
            self._p.append(
                ((2 * n + 1) * self.mu * self._p[n] - n * self._p[n - 1]) / (n + 1)
            )
        old = len(self._s)
        s = np.empty(n_max + 1, dtype=np.complex128)
        s[:old] = self._s
        for n in range(old, n_max + 1):
            pn = self._p[n]
            pnm2 = self._p[n - 2] if n >= 2 else 0.0
            s[n] = self.alpha * np.exp(-1j * n * self.phi) * (pn - pnm2) / (2 * n - 1)
            if n == 0:
                s[n] += 1.0 - 0.5j * self.R
            elif n == 1:
                s[n] += 1.0 + 0.5j * self.R
        self._s = s

    @property
    def s(self) -> np.ndarray:
        return self._s

    def coefficients(self, n_max: int) -> np.ndarray:
        self.extend(n_max)
        return self._s[: n_max + 1]

    def s0(self) -> complex:
        return complex(self._s[0])


class BoundaryHistory:
    """Per-boundary history of the convolved sequence ``g^(l)``, l = 1..n."""

    def __init__(self, capacity: int = 256):
        self._buf = np.zeros(capacity, dtype=np.complex128)
        self.n = 0

    def append(self, value: complex) -> None:
        if self.n >= len(self._buf):
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
        self._buf[self.n] = value
        self.n += 1

    def convolve(self, kernel: ConvolutionKernel) -> complex:
        """``sum_{l=1}^{n} s^(n+1-l) g^(l)`` for the step ``n -> n+1``."""
        if self.n == 0:
            return 0.0 + 0.0j
        s = kernel.coefficients(self.n)
        # coefficient s^(n+1-l) pairs with g^(l): reversed slice s[1..n]
        return complex(np.dot(s[1 : self.n + 1][::-1], self._buf[: self.n]))


# ---------------------------------------------------------------------------
# Gauge-change sequences


def beta_factor(n: int, energy: float, dt: float) -> complex:
    """``exp(-2 i n arctan(dt E / 2 hbar))``, the discrete ``e^{-iEt/hbar}``."""
    return np.exp(-2j * n * math.atan(dt * energy / (2.0 * HBAR)))


def gamma_factor(n: int, energy: float, v_r0: float, dt: float) -> complex:
    """Discrete ``e^{i(V_r(0)-E)t/hbar}`` analogue (unit modulus)."""
    return np.exp(
        2j * n * (math.atan(dt * v_r0 / (2.0 * HBAR)) - math.atan(dt * energy / (2.0 * HBAR)))
    )


class EpsilonAccumulator:
    """Running gauge phase ``exp(i sum_l 2 arctan(dt V_r^(l+1/2) / 2 hbar))``.

    Discretizes ``exp((i/hbar) int V_r dt)`` consistently with the midpoint
    potential samples of the Crank-Nicolson scheme.
    """

    def __init__(self, dt: float):
        self.dt = dt
        self._phase = 0.0
        self.values = [1.0 + 0.0j]  # epsilon^(0) = 1

    def advance(self, v_r_half: float) -> complex:
        """Append ``epsilon^(n+1)`` given the sample ``V_r^{(n+1/2)}``."""
        self._phase += 2.0 * math.atan(self.dt * v_r_half / (2.0 * HBAR))
        val = complex(np.exp(1j * self._phase))
        self.values.append(val)
        return val

    def __getitem__(self, n: int) -> complex:
        return self.values[n]
