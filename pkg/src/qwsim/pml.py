"""Complex coordinate stretching: absorption profile and stretched operators.

The coordinate map ``x -> x + e^{i pi/4} int sigma`` turns outgoing waves
into exponentially damped ones inside the layers.  On the discrete level it
amounts to replacing the second derivative by
``c c' D1 + c^2 D2`` with ``c = 1/(1 + e^{i pi/4} sigma)``; the derivative
``c'`` is evaluated analytically to avoid a spurious differencing error
inside the layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import stencils
from .errors import GridError
from .grid import Grid1D

_PHASE = np.exp(1j * np.pi / 4.0)


@dataclass(frozen=True)
class PmlProfile:
    """Absorption profile ``sigma(x) = sigma0 * depth^p`` outside the onsets.

    ``sigma0`` is in nm^-p so that sigma is dimensionless; ``end_condition``
    selects the closure at the outer ends of the computational domain.
    """

    sigma0: float = 0.02
    p: int = 3
    d0: float = 40.0
    end_condition: str = "neumann"

    def __post_init__(self):
        if self.sigma0 < 0 or self.p < 1 or self.d0 <= 0:
            raise GridError("invalid absorption profile parameters")
        if self.end_condition not in ("dirichlet", "neumann"):
            raise GridError(f"unknown end condition {self.end_condition!r}")

    def sigma(self, x, x_star_l: float, x_star_r: float):
        x = np.asarray(x, dtype=float)
        left = np.clip(x_star_l - x, 0.0, None)
        right = np.clip(x - x_star_r, 0.0, None)
        return self.sigma0 * (left**self.p + right**self.p)

    def sigma_prime(self, x, x_star_l: float, x_star_r: float):
        x = np.asarray(x, dtype=float)
        left = np.clip(x_star_l - x, 0.0, None)
        right = np.clip(x - x_star_r, 0.0, None)
        return self.p * self.sigma0 * (right ** (self.p - 1) - left ** (self.p - 1))


def stretch_factor(profile: PmlProfile, x, x_star_l: float, x_star_r: float):
    """Complex stretch ``c(x) = 1/(1 + e^{i pi/4} sigma(x))``."""
    return 1.0 / (1.0 + _PHASE * profile.sigma(x, x_star_l, x_star_r))


def stretch_factor_prime(profile: PmlProfile, x, x_star_l: float, x_star_r: float):
    """Analytic derivative ``c'(x) = -e^{i pi/4} sigma'(x) c(x)^2``."""
    c = stretch_factor(profile, x, x_star_l, x_star_r)
    return -_PHASE * profile.sigma_prime(x, x_star_l, x_star_r) * c * c


def build_stretched_d2(profile: PmlProfile, order: int, grid: Grid1D) -> sp.csr_matrix:
    """Stretched second derivative ``diag(c c') D1 + diag(c^2) D2``.

    Rows between the onsets are bitwise identical to the plain ``d2`` rows
    of the same order since ``c = 1`` and ``c' = 0`` there.
    """
    if not grid.has_pml:
        raise GridError("grid carries no layer zoning")
    xl, xr = grid.pml_onsets
    x = grid.x
    c = stretch_factor(profile, x, xl, xr)
    cp = stretch_factor_prime(profile, x, xl, xr)
    closure = profile.end_condition
    op2 = stencils.d2(order, grid.dx, grid.n_points, closure)
    op = sp.diags(c * c) @ op2
    if np.any(cp != 0.0):
        op1 = stencils.d1(order, grid.dx, grid.n_points, closure)
        op = op + sp.diags(c * cp) @ op1
    op = sp.csr_matrix(op)
    op.eliminate_zeros()
    op.sort_indices()
    return op
