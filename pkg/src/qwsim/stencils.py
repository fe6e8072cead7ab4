"""Symmetric finite-difference derivative operators of orders 2, 4 and 6.

First-derivative rows are antisymmetric, second-derivative rows symmetric;
the coefficients are the exact central-difference rationals.  Boundary
closures: Dirichlet drops out-of-range neighbors (they multiply implicit
zeros), Neumann reflects ghost values about the boundary node.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import GridError

ORDERS = (2, 4, 6)

# (numerator coefficients centered on the diagonal, common denominator)
_D1 = {
    2: ((-1, 0, 1), 2),
    4: ((1, -8, 0, 8, -1), 12),
    6: ((-1, 9, -45, 0, 45, -9, 1), 60),
}
_D2 = {
    2: ((1, -2, 1), 1),
    4: ((-1, 16, -30, 16, -1), 12),
    6: ((2, -27, 270, -490, 270, -27, 2), 180),
}


def half_width(order: int) -> int:
    if order not in ORDERS:
        raise GridError(f"stencil order must be one of {ORDERS}, got {order}")
    return order // 2


def _assemble(table, order: int, scale: float, n: int, closure: str) -> sp.csr_matrix:
    coeffs, den = table[order]
    h = half_width(order)
    if n <= 2 * h:
        raise GridError(f"grid of {n} points too small for order-{order} stencil")
    if closure not in ("dirichlet", "neumann"):
        raise GridError(f"unknown closure {closure!r}")
    mat = sp.lil_matrix((n, n), dtype=np.complex128)
    vals = [c * scale / den for c in coeffs]
    for i in range(n):
        for off, v in zip(range(-h, h + 1), vals):
            if v == 0.0:
                continue
            j = i + off
            if j < 0:
                if closure == "neumann":
                    mat[i, -j] += v  # ghost reflection about node 0
            elif j >= n:
                if closure == "neumann":
                    mat[i, 2 * (n - 1) - j] += v  # reflection about node n-1
            else:
                mat[i, j] += v
    return mat.tocsr()


def d1(order: int, dx: float, n: int, closure: str = "dirichlet") -> sp.csr_matrix:
    """First-derivative operator matrix."""
    return _assemble(_D1, order, 1.0 / dx, n, closure)


def d2(order: int, dx: float, n: int, closure: str = "dirichlet") -> sp.csr_matrix:
    """Second-derivative operator matrix."""
    return _assemble(_D2, order, 1.0 / dx**2, n, closure)


def tensor_laplacian_2d(op_x1: sp.spmatrix, op_x2: sp.spmatrix) -> sp.csr_matrix:
    """Kronecker-sum Laplacian with index convention ``j = j1*n2 + j2``."""
    n1, m1 = op_x1.shape
    n2, m2 = op_x2.shape
    if n1 != m1 or n2 != m2:
        raise GridError("tensor factors must be square")
    return (
        sp.kron(op_x1, sp.identity(n2, format="csr"), format="csr")
        + sp.kron(sp.identity(n1, format="csr"), op_x2, format="csr")
    ).tocsr()
