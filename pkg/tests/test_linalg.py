import numpy as np
import pytest
import scipy.sparse as sp

from qwsim import linalg
from qwsim.errors import NumericalError, SingularMatrixError
from qwsim.units import HBAR, MSTAR


def test_identity_solve():
    a = linalg.SparseComplexMatrix(4)
    for i in range(4):
        a.add(i, i, 1.0)
    b = np.array([1, 2j, -3, 0.5], dtype=complex)
    x = linalg.lu_solve(a, b)
    assert np.allclose(x, b)


def test_singular_zero_row_reports_row():
    a = linalg.SparseComplexMatrix(3)
    a.add(0, 0, 1.0)
    a.add(2, 2, 1.0)
    with pytest.raises(SingularMatrixError) as exc:
        linalg.lu_solve(a, np.ones(3, dtype=complex))
    assert exc.value.row == 1


def test_dense_block_insertion_preserves_other_rows():
    n = 8
    a = linalg.SparseComplexMatrix(n)
    for i in range(n):
        a.add(i, i, 2.0 + 1j * i)
        if i + 1 < n:
            a.add(i, i + 1, -1.0)
    before = a.to_dense()
    block = np.arange(6, dtype=complex).reshape(2, 3) + 1.0
    a.insert_dense_block(3, 2, block)
    after = a.to_dense()
    untouched = [i for i in range(n) if i not in (3, 4)]
    assert np.array_equal(before[untouched], after[untouched])
    assert np.array_equal(after[3, 2:5], block[0])
    assert np.array_equal(after[4, 2:5], block[1])


def test_lu_matches_dense_solve_on_random_complex():
    rng = np.random.default_rng(11)
    n = 60
    dense = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    dense += np.diag(10.0 + np.zeros(n))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = linalg.lu_solve(sp.csr_matrix(dense), b)
    assert np.allclose(x, np.linalg.solve(dense, b), rtol=1e-10, atol=1e-12)


def test_lu_agrees_with_cg_on_hermitian_positive_definite():
    rng = np.random.default_rng(4)
    n = 50
    m = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = m @ m.conj().T + n * np.eye(n)
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = linalg.lu_solve(sp.csr_matrix(a), b)
    from scipy.sparse.linalg import cg

    xc, info = cg(sp.csr_matrix(a), b, rtol=1e-12, maxiter=5000)
    assert info == 0
    assert np.linalg.norm(x - xc) <= 1e-9 * np.linalg.norm(xc)


def infinite_square_well_eigs(m_pts, dx):
    """Dirichlet tridiagonal Laplacian closed form."""
    w = (m_pts + 1) * dx
    m = np.arange(1, m_pts + 1)
    return (HBAR**2 / (MSTAR * dx**2)) * (1 - np.cos(m * np.pi * dx / w))


def test_tridiag_square_well_closed_form():
    m_pts, dx = 120, 0.5
    diag = np.full(m_pts, HBAR**2 / (MSTAR * dx**2))
    off = np.full(m_pts - 1, -HBAR**2 / (2 * MSTAR * dx**2))
    w, v = linalg.tridiag_eigs(diag, off, dx, 5)
    exact = infinite_square_well_eigs(m_pts, dx)[:5]
    assert np.allclose(w, exact, rtol=1e-12)
    # dx-weighted orthonormality
    gram = dx * v.T @ v
    assert np.allclose(gram, np.eye(5), atol=1e-12)
    # sign convention: largest-magnitude entry positive
    for m in range(5):
        assert v[np.argmax(np.abs(v[:, m])), m] > 0


def test_tridiag_parabolic_cross_section():
    # lowest two transverse energies of the paper's parabolic guide
    dx, L2, omega = 0.5, 60.0, 50.0
    n2 = int(round(L2 / dx)) + 1
    x2 = dx * np.arange(1, n2 - 1)
    v = 0.5 * MSTAR * omega**2 * (x2 - L2 / 2) ** 2
    diag = HBAR**2 / (MSTAR * dx**2) + v
    off = np.full(len(x2) - 1, -HBAR**2 / (2 * MSTAR * dx**2))
    w, _ = linalg.tridiag_eigs(diag, off, dx, 2)
    assert w[0] == pytest.approx(16.45, rel=0.01)
    assert w[1] == pytest.approx(49.36, rel=0.01)


def test_tridiag_rejects_too_many_eigenpairs():
    with pytest.raises(NumericalError):
        linalg.tridiag_eigs(np.ones(3), np.zeros(2), 1.0, 7)


def test_shift_invert_harmonic_oscillator():
    # 1D harmonic oscillator, lowest eigenvalue hbar*omega/2
    dx, omega = 0.25, 25.0
    x = np.arange(-60, 60 + dx / 2, dx)
    n = len(x)
    v = 0.5 * MSTAR * omega**2 * x**2
    main = HBAR**2 / (MSTAR * dx**2) + v
    a = sp.diags(
        [np.full(n - 1, -HBAR**2 / (2 * MSTAR * dx**2)), main,
         np.full(n - 1, -HBAR**2 / (2 * MSTAR * dx**2))],
        [-1, 0, 1],
        format="csr",
        dtype=complex,
    )
    w, v_ = linalg.shift_invert_eigs(a, shift=0.0, k=3)
    assert w[0] == pytest.approx(0.5 * HBAR * omega, rel=5e-3)
    assert w[1] == pytest.approx(1.5 * HBAR * omega, rel=5e-3)


def test_shift_invert_rejects_exact_eigenvalue_shift():
    a = sp.csr_matrix(np.diag([1.0, 2.0]).astype(complex))
    with pytest.raises(SingularMatrixError):
        linalg.shift_invert_eigs(a, shift=1.0, k=1)
