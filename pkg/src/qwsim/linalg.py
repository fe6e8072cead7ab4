"""Sparse complex linear algebra: row surgery, direct LU, eigensolvers.

Direct sparse LU is the only linear solver: the boundary rows make the
system matrices non-Hermitian, which rules out most iterative methods.
Factorizations are wrapped so they can be reused across right-hand sides
and across time steps whenever the matrix values are unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalError, SingularMatrixError


class SparseComplexMatrix:
    """Square complex matrix in builder form, finalized to CSR.

    Entries accumulate via :meth:`add`; whole rows can be replaced and
    dense row blocks inserted (used by the transparent-boundary rows).
    After :meth:`finalize` the structure is frozen; mutating methods
    invalidate the cached CSR form.
    """

    def __init__(self, n: int):
        self.n = n
        self._rows: list[dict[int, complex]] = [dict() for _ in range(n)]
        self._csr: sp.csr_matrix | None = None

    def add(self, i: int, j: int, value: complex) -> None:
        row = self._rows[i]
        row[j] = row.get(j, 0.0) + value
        self._csr = None

    def add_csr(self, mat: sp.spmatrix, scale: complex = 1.0) -> None:
        coo = sp.coo_matrix(mat)
        for i, j, v in zip(coo.row, coo.col, coo.data):
            self.add(int(i), int(j), scale * v)

    def replace_row(self, i: int, entries: dict[int, complex]) -> None:
        self._rows[i] = dict(entries)
        self._csr = None

    def insert_dense_block(self, row0: int, col0: int, block: np.ndarray) -> None:
        """Replace rows ``row0:row0+k`` by dense rows starting at ``col0``."""
        k, m = block.shape
        for r in range(k):
            self._rows[row0 + r] = {
                col0 + c: block[r, c] for c in range(m) if block[r, c] != 0.0
            }
        self._csr = None

    def finalize(self) -> sp.csr_matrix:
        if self._csr is None:
            indptr = [0]
            indices: list[int] = []
            data: list[complex] = []
            for row in self._rows:
                cols = sorted(row)
                indices.extend(cols)
                data.extend(row[c] for c in cols)
                indptr.append(len(indices))
            self._csr = sp.csr_matrix(
                (np.asarray(data, dtype=np.complex128), indices, indptr),
                shape=(self.n, self.n),
            )
        return self._csr

    def to_dense(self) -> np.ndarray:
        return self.finalize().toarray()


@dataclass
class LuFactorization:
    """Reusable sparse LU factors of a finalized matrix."""

    lu: spla.SuperLU
    matrix: sp.csr_matrix

    def solve(self, b: np.ndarray, check_residual: bool = False) -> np.ndarray:
        x = self.lu.solve(np.asarray(b, dtype=np.complex128))
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("non-finite solution from LU solve")
        if check_residual:
            nb = np.linalg.norm(b)
            if nb > 0:
                res = np.linalg.norm(self.matrix @ x - b) / nb
                if res > 1e-10:
                    raise NumericalError(f"LU relative residual {res:.3e} > 1e-10")
        return x


def lu_factor(a) -> LuFactorization:
    csr = a.finalize() if isinstance(a, SparseComplexMatrix) else sp.csr_matrix(a)
    if csr.shape[0] != csr.shape[1]:
        raise SingularMatrixError("matrix must be square")
    # Empty rows are structural singularities; report the first offender.
    nnz_per_row = np.diff(csr.indptr)
    bad = np.flatnonzero(nnz_per_row == 0)
    if len(bad):
        raise SingularMatrixError("structurally singular: empty row", row=int(bad[0]))
    try:
        lu = spla.splu(csr.tocsc())
    except RuntimeError as exc:  # SuperLU reports "Factor is exactly singular"
        raise SingularMatrixError(f"LU factorization failed: {exc}") from exc
    return LuFactorization(lu=lu, matrix=csr)


def lu_solve(a, b: np.ndarray, check_residual: bool = True) -> np.ndarray:
    """One-shot direct solve ``A x = b`` with residual verification."""
    return lu_factor(a).solve(b, check_residual=check_residual)


def tridiag_eigs(
    diag: np.ndarray, offdiag: np.ndarray, dx: float, k_lowest: int
) -> tuple[np.ndarray, np.ndarray]:
    """Lowest eigenpairs of a real symmetric tridiagonal matrix.

    Eigenvectors are orthonormal under the dx-weighted discrete scalar
    product and sign-fixed so the entry of largest magnitude is positive.
    """
    n = len(diag)
    if k_lowest > n:
        raise NumericalError(f"requested {k_lowest} eigenpairs of a {n}-dim matrix")
    w, v = eigh_tridiagonal(
        np.asarray(diag, dtype=float),
        np.asarray(offdiag, dtype=float),
        select="i",
        select_range=(0, k_lowest - 1),
    )
    v = v / np.sqrt(dx)
    for m in range(v.shape[1]):
        imax = np.argmax(np.abs(v[:, m]))
        if v[imax, m] < 0:
            v[:, m] = -v[:, m]
    return w, v


def shift_invert_eigs(
    a, shift: float, k: int, tol_residual: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    """``k`` eigenpairs of a Hermitian sparse matrix nearest ``shift``."""
    csr = a.finalize() if isinstance(a, SparseComplexMatrix) else sp.csr_matrix(a)
    n = csr.shape[0]
    if k >= n - 1:
        # ARPACK needs k < n-1; tiny problems fall back to dense.
        w, v = np.linalg.eigh(csr.toarray())
        if np.min(np.abs(w - shift)) <= 1e-14 * max(1.0, np.max(np.abs(w))):
            raise SingularMatrixError(f"shift {shift} coincides with an eigenvalue")
        order = np.argsort(np.abs(w - shift))[:k]
        w, v = w[order], v[:, order]
    else:
        try:
            w, v = spla.eigsh(csr, k=k, sigma=shift, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise NumericalError(f"eigensolver did not converge: {exc}") from exc
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"shift-invert factorization failed (shift {shift} may be an "
                f"eigenvalue): {exc}"
            ) from exc
    order = np.argsort(w)
    w, v = w[order], v[:, order]
    for m in range(v.shape[1]):
        res = np.linalg.norm(csr @ v[:, m] - w[m] * v[:, m])
        if res > tol_residual * np.linalg.norm(v[:, m]):
            raise NumericalError(
                f"eigenpair residual {res:.3e} exceeds {tol_residual:.1e}"
            )
    return w, v
