"""2D stationary waveguide machinery on the reduced mesh.

Transverse mode bases, Hamiltonian assembly including magnetic
vector-potential terms, mode-resolved transparent boundary rows, layer
injection, transmission probability, flux sweeps, and bound states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh as dense_eigh

from . import dtbc, pml, stencils
from .errors import NumericalError, ScenarioError
from .grid import Grid2D
from .linalg import lu_factor, shift_invert_eigs, tridiag_eigs
from .sim1d import InterfaceSource
from .units import ECHARGE, HBAR, MSTAR, TESLA_NM2, flux_quantum_tesla_nm2

KINETIC = HBAR * HBAR / (2.0 * MSTAR)


# ---------------------------------------------------------------------------
# Transverse modes


@dataclass(frozen=True)
class ModeBasis:
    """Eigenstates of the lead cross-section on the retained range."""

    energies: np.ndarray  # ascending, shape (n_modes,)
    chi: np.ndarray  # (M, n_modes), dx-weighted orthonormal columns
    j21: int
    j22: int
    dx: float
    order: int

    @property
    def m_count(self) -> int:
        return self.chi.shape[0]

    @property
    def n_modes(self) -> int:
        return self.chi.shape[1]

    def project(self, column_values: np.ndarray) -> np.ndarray:
        """Mode coefficients of a lead-column field sample."""
        return self.dx * (self.chi.T @ column_values)


def transverse_modes(
    profile_values: np.ndarray,
    dx: float,
    order: int = 2,
    j21: int = 0,
    j22: int | None = None,
    n_modes: int | None = None,
) -> ModeBasis:
    """Eigenpairs of the transverse lead Hamiltonian with Dirichlet ends.

    ``profile_values`` is the lead potential on the retained transverse
    points.  Order 2 uses the symmetric tridiagonal solver; higher orders
    diagonalize the banded operator densely (cross sections have at most a
    few hundred points).
    """
    v = np.asarray(profile_values, dtype=float)
    m = len(v)
    if j22 is None:
        j22 = j21 + m - 1
    k = n_modes if n_modes is not None else m
    if order == 2:
        diag = HBAR**2 / (MSTAR * dx**2) + v
        off = np.full(m - 1, -(HBAR**2) / (2.0 * MSTAR * dx**2))
        w, vec = tridiag_eigs(diag, off, dx, k)
    else:
        op = stencils.d2(order, dx, m, "dirichlet").toarray().real
        h = -KINETIC * op + np.diag(v)
        w, vec = dense_eigh(h)
        w, vec = w[:k], vec[:, :k] / math.sqrt(dx)
        for mm in range(vec.shape[1]):
            imax = np.argmax(np.abs(vec[:, mm]))
            if vec[imax, mm] < 0:
                vec[:, mm] = -vec[:, mm]
    return ModeBasis(energies=w, chi=vec, j21=j21, j22=j22, dx=dx, order=order)


def lead_basis(grid: Grid2D, potential, order: int = 2, side: str = "left",
               n_modes: int | None = None) -> ModeBasis:
    j21, j22 = grid.lead_range_left if side == "left" else grid.lead_range_right
    x2 = grid.x2[j21 : j22 + 1]
    prof = potential.lead_profile(x2)
    return transverse_modes(prof, grid.dx, order, j21, j22, n_modes)


# ---------------------------------------------------------------------------
# Magnetic field


@dataclass(frozen=True)
class MagneticField:
    """Homogeneous field through a disk of radius ``r0``, Coulomb gauge.

    The vector potential is rotationally linear inside the disk and decays
    like an azimuthal dipole outside; it is zeroed within ``margin`` of the
    terminals so the open boundary rows stay valid.
    ``b0`` is in tesla (a waveform may override it in transient runs).
    """

    b0: float
    r0: float = 10.0
    center: tuple[float, float] = (150.0, 45.0)
    margin: float = 2.5

    def shape_functions(self, x1: np.ndarray, x2: np.ndarray, L1: float):
        """Unit-B0 vector potential components on the tensor grid, in T nm."""
        c1, c2 = self.center
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        dx1 = X1 - c1
        dx2 = X2 - c2
        r2 = dx1 * dx1 + dx2 * dx2
        inside = r2 <= self.r0**2
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(inside, 0.5, 0.5 * self.r0**2 / np.where(r2 > 0, r2, 1.0))
        a1 = -dx2 * scale
        a2 = dx1 * scale
        live = (X1 >= self.margin) & (X1 <= L1 - self.margin)
        a1 = np.where(live, a1, 0.0)
        a2 = np.where(live, a2, 0.0)
        return a1, a2

    def flux(self) -> float:
        """Enclosed flux in T nm^2."""
        return self.b0 * math.pi * self.r0**2


def b0_for_flux(flux_in_quanta: float, r0: float = 10.0) -> float:
    """Field strength in tesla enclosing the given flux (units of h/2e)."""
    return flux_in_quanta * flux_quantum_tesla_nm2() / (math.pi * r0**2)


# ---------------------------------------------------------------------------
# Hamiltonian assembly


@dataclass
class Hamiltonian2D:
    """Hamiltonian pieces on the reduced mesh.

    ``H(B0) = base + B0 * conv + B0^2 * diamag`` with ``base`` holding the
    kinetic and potential parts; the field-strength decomposition keeps
    time-dependent fields cheap (three matvecs, no reassembly).
    """

    grid: Grid2D
    base: sp.csr_matrix
    conv: sp.csr_matrix | None
    diamag: sp.csr_matrix | None
    kinetic: sp.csr_matrix
    order: int
    method: str

    def matrix(self, b0: float = 0.0) -> sp.csr_matrix:
        h = self.base
        if self.conv is not None and b0 != 0.0:
            h = h + b0 * self.conv + (b0 * b0) * self.diamag
        h = sp.csr_matrix(h)
        h.sort_indices()
        return h

    def apply(self, psi: np.ndarray, b0: float = 0.0) -> np.ndarray:
        out = self.base @ psi
        if self.conv is not None and b0 != 0.0:
            out += b0 * (self.conv @ psi) + (b0 * b0) * (self.diamag @ psi)
        return out


def _restrict(mat: sp.spmatrix, kept: np.ndarray) -> sp.csr_matrix:
    out = sp.csr_matrix(mat)[kept, :][:, kept]
    out.sort_indices()
    return sp.csr_matrix(out)


def assemble_hamiltonian_2d(
    grid: Grid2D,
    potential,
    *,
    order: int = 2,
    method: str = "dtbc",
    profile: pml.PmlProfile | None = None,
    field: MagneticField | None = None,
    closed: bool = False,
) -> Hamiltonian2D:
    """Assemble ``H`` on the reduced mesh with eliminated neighbors as zeros.

    ``closed`` uses plain Dirichlet operators in both directions (bound
    states); otherwise the longitudinal operator carries the layer stretch
    for ``method="pml"`` or plain rows for ``method="dtbc"`` (the terminal
    rows get replaced later).
    """
    n1, n2, dx = grid.n1, grid.n2, grid.dx
    if method == "pml" and not closed:
        if profile is None or not grid.has_pml:
            raise ScenarioError("layer runs need a profile and a zoned grid")
        from .grid import Grid1D

        g1 = Grid1D(
            x0=grid.x1_0, dx=dx, n_points=n1, dev_lo=grid.dev_lo,
            dev_hi=grid.dev_hi, pml_onsets=grid.pml_onsets, d0=grid.d0,
        )
        op_x1 = pml.build_stretched_d2(profile, order, g1)
    else:
        if method == "dtbc" and not closed and order != 2:
            raise ScenarioError("transparent boundary rows exist only at order 2")
        op_x1 = stencils.d2(order, dx, n1, "dirichlet")
    op_x2 = stencils.d2(order, dx, n2, "dirichlet")
    lap = stencils.tensor_laplacian_2d(op_x1, op_x2)
    kept = grid.reduced_to_full
    kinetic = _restrict(-KINETIC * lap, kept)

    v_full = potential.values(grid.x1, grid.x2)
    v_red = v_full.ravel()[kept]
    base = kinetic + sp.diags(v_red.astype(np.complex128))

    conv = diamag = None
    if field is not None:
        a1, a2 = field.shape_functions(grid.x1, grid.x2, grid.L1)
        d1_x1 = stencils.d1(order, dx, n1, "dirichlet")
        d1_x2 = stencils.d1(order, dx, n2, "dirichlet")
        s1 = sp.kron(d1_x1, sp.identity(n2, format="csr"), format="csr")
        s2 = sp.kron(sp.identity(n1, format="csr"), d1_x2, format="csr")
        da1 = sp.diags(a1.ravel())
        da2 = sp.diags(a2.ravel())
        # symmetrized convection keeps H exactly Hermitian on the mesh;
        # equivalent to A.grad at this order since div A = 0
        sym = da1 @ s1 + s1 @ da1 + da2 @ s2 + s2 @ da2
        coef = -1j * ECHARGE * HBAR / (2.0 * MSTAR) * TESLA_NM2
        conv = _restrict(coef * sym, kept)
        dia_vals = (ECHARGE**2 / (2.0 * MSTAR)) * TESLA_NM2**2 * (
            a1.ravel() ** 2 + a2.ravel() ** 2
        )
        diamag = sp.csr_matrix(sp.diags(dia_vals[kept].astype(np.complex128)))
    base = sp.csr_matrix(base)
    base.sort_indices()
    return Hamiltonian2D(
        grid=grid, base=base, conv=conv, diamag=diamag, kinetic=kinetic,
        order=order, method=method,
    )


# ---------------------------------------------------------------------------
# Stationary boundary machinery


def dtbc_blocks_2d(
    basis_l: ModeBasis,
    basis_r: ModeBasis,
    e_total: float,
    dx: float,
    a_amp: complex | None = None,
    inject: str = "left",
):
    """Dense terminal row blocks and inhomogeneity for the stationary solve.

    Row ``m`` couples the first (resp. last) two retained columns through
    the mode projections; evanescent modes (``E^(m) > E``) participate with
    their decaying multiplier.  The incident amplitude defaults to ``1/dx``
    so the field is of the order of the transverse eigenstates.
    """
    if a_amp is None:
        a_amp = 1.0 / dx
    m_l = basis_l.m_count
    m_r = basis_r.m_count
    alphas_l = np.array(
        [dtbc.stationary_alpha(e_total - e, dx) for e in basis_l.energies]
    )
    alphas_r = np.array(
        [dtbc.stationary_alpha(e_total - e, dx) for e in basis_r.energies]
    )
    left = np.zeros((m_l, 2 * m_l), dtype=np.complex128)
    for m in range(m_l):
        left[m, :m_l] = dx * basis_l.chi[:, m]
        left[m, m_l:] = -alphas_l[m] * dx * basis_l.chi[:, m]
    right = np.zeros((m_r, 2 * m_r), dtype=np.complex128)
    for m in range(m_r):
        right[m, :m_r] = -alphas_r[m] * dx * basis_r.chi[:, m]
        right[m, m_r:] = dx * basis_r.chi[:, m]
    rhs_left = np.zeros(m_l, dtype=np.complex128)
    rhs_right = np.zeros(m_r, dtype=np.complex128)
    if inject == "left":
        rhs_left[0] = a_amp * (1.0 - alphas_l[0] ** 2)
    else:
        rhs_right[0] = a_amp * (1.0 - alphas_r[0] ** 2)
    return left, right, rhs_left, rhs_right, alphas_l, alphas_r


def pml_injection_2d(
    grid: Grid2D,
    basis: ModeBasis,
    kinetic_red: sp.csr_matrix,
    e_kin: float,
    order: int,
    amplitude: complex,
    inject: str = "left",
    k_relation: str = "auto",
) -> np.ndarray:
    """Interface source vector realizing an incoming transverse-mode wave."""
    if k_relation == "discrete" or (k_relation == "auto" and order == 2):
        k = dtbc.discrete_k(e_kin, grid.dx, order)
    else:
        k = dtbc.continuous_k(e_kin)
    n_red = grid.n_reduced
    mask = np.zeros(n_red, dtype=bool)
    inc_full = np.zeros(grid.n1 * grid.n2, dtype=np.complex128)
    x1 = grid.x1
    j21, j22 = (basis.j21, basis.j22)
    if inject == "left":
        for j1 in range(0, grid.dev_lo):
            mask[grid.column_reduced_indices(j1)] = True
        phase = np.exp(1j * k * x1)
    else:
        for j1 in range(grid.dev_hi + 1, grid.n1):
            mask[grid.column_reduced_indices(j1)] = True
        phase = np.exp(-1j * k * (x1 - x1[grid.dev_hi]))
    block = np.zeros((grid.n1, grid.n2), dtype=np.complex128)
    block[:, j21 : j22 + 1] = amplitude * phase[:, None] * basis.chi[:, 0][None, :]
    inc_full = block.ravel()
    inc_red = inc_full[grid.reduced_to_full]
    src = InterfaceSource(kinetic_red, mask)
    if grid.pml_onsets is not None:
        xl, xr = grid.pml_onsets
        x_inject = 0.0 if inject == "left" else grid.L1
        if not (xl < x_inject < xr):
            raise ScenarioError("injection column lies inside the active layer")
    return src.build(inc_red)


@dataclass
class StationaryResult:
    grid: Grid2D
    psi: np.ndarray  # reduced mesh
    e_total: float
    e_kin: float
    basis_l: ModeBasis
    basis_r: ModeBasis
    amplitude: complex
    method: str
    order: int
    inject: str = "left"

    def full_field(self) -> np.ndarray:
        return self.grid.scatter_to_full(self.psi)

    def lead_column(self, side: str) -> np.ndarray:
        j1 = self.grid.dev_lo if side == "left" else self.grid.dev_hi
        idx = self.grid.column_reduced_indices(j1)
        return self.psi[idx]


def solve_scattering_2d(
    grid: Grid2D,
    potential,
    e_kin: float,
    *,
    method: str = "dtbc",
    order: int = 2,
    profile: pml.PmlProfile | None = None,
    field: MagneticField | None = None,
    inject: str = "left",
    amplitude: complex | None = None,
    scale_interior: bool = True,
    hamiltonian: Hamiltonian2D | None = None,
    bases: tuple[ModeBasis, ModeBasis] | None = None,
    k_relation: str = "auto",
) -> StationaryResult:
    """Stationary scattering state in the waveguide at ``E = E_kin + E0``."""
    if bases is None:
        basis_l = lead_basis(grid, potential, order if method == "pml" else 2, "left")
        basis_r = lead_basis(grid, potential, order if method == "pml" else 2, "right")
    else:
        basis_l, basis_r = bases
    inj_basis = basis_l if inject == "left" else basis_r
    e_total = e_kin + inj_basis.energies[0]
    if amplitude is None:
        amplitude = 1.0 / grid.dx

    if hamiltonian is None:
        hamiltonian = assemble_hamiltonian_2d(
            grid, potential, order=order, method=method, profile=profile,
            field=field,
        )
    b0 = field.b0 if field is not None else 0.0
    h = hamiltonian.matrix(b0)
    n = grid.n_reduced
    system = h - e_total * sp.identity(n, format="csr", dtype=np.complex128)

    if method == "dtbc":
        m_l = basis_l.m_count
        m_r = basis_r.m_count
        left, right, rhs_l, rhs_r, _, _ = dtbc_blocks_2d(
            basis_l, basis_r, e_total, grid.dx, amplitude, inject
        )
        scale = 1.0 / e_total if (scale_interior and e_total != 0.0) else 1.0
        body = sp.csr_matrix(system[m_l : n - m_r, :]) * scale
        top = sp.hstack(
            [sp.csr_matrix(left), sp.csr_matrix((m_l, n - 2 * m_l))], format="csr"
        )
        bottom = sp.hstack(
            [sp.csr_matrix((m_r, n - 2 * m_r)), sp.csr_matrix(right)], format="csr"
        )
        a = sp.vstack([top, body, bottom], format="csr")
        b = np.zeros(n, dtype=np.complex128)
        b[:m_l] = rhs_l
        b[n - m_r :] = rhs_r
    else:
        a = system
        b = pml_injection_2d(
            grid, inj_basis, hamiltonian.kinetic, e_kin, order, amplitude,
            inject, k_relation,
        )
    psi = lu_factor(a).solve(b)
    if not np.all(np.isfinite(psi)):
        raise NumericalError("non-finite stationary solution")
    return StationaryResult(
        grid=grid, psi=psi, e_total=e_total, e_kin=e_kin, basis_l=basis_l,
        basis_r=basis_r, amplitude=amplitude, method=method, order=order,
        inject=inject,
    )


def transmission(result: StationaryResult) -> float:
    """Transmission probability from the mode-0 projection at the far lead.

    Valid in the single-propagating-mode regime; with more than one open
    mode the projection no longer measures the full transmitted current.
    """
    out_side = "right" if result.inject == "left" else "left"
    basis = result.basis_r if out_side == "right" else result.basis_l
    e_kin_out = result.e_total - basis.energies[0]
    if basis.n_modes > 1 and result.e_total > basis.energies[1]:
        raise NumericalError(
            "more than one propagating mode at this energy; use a "
            "current-based transmission computation"
        )
    if e_kin_out <= 0:
        return 0.0
    col = result.lead_column(out_side)
    coef = basis.project(col)[0]
    t = abs(coef / result.amplitude) ** 2
    return float(t)


def flux_sweep(
    grid: Grid2D,
    potential,
    e_kin: float,
    flux_values: np.ndarray,
    *,
    r0: float = 10.0,
    center: tuple[float, float] = (150.0, 45.0),
    method: str = "pml",
    order: int = 2,
    profile: pml.PmlProfile | None = None,
) -> np.ndarray:
    """Transmission versus enclosed flux (in units of the flux quantum)."""
    out = np.zeros((len(flux_values), 2))
    basis_l = lead_basis(grid, potential, order if method == "pml" else 2, "left")
    basis_r = lead_basis(grid, potential, order if method == "pml" else 2, "right")
    field0 = MagneticField(b0=1.0, r0=r0, center=center)
    ham = assemble_hamiltonian_2d(
        grid, potential, order=order, method=method, profile=profile, field=field0
    )
    for i, phi in enumerate(flux_values):
        field = MagneticField(b0=b0_for_flux(phi, r0), r0=r0, center=center)
        res = solve_scattering_2d(
            grid, potential, e_kin, method=method, order=order, profile=profile,
            field=field, hamiltonian=ham, bases=(basis_l, basis_r),
        )
        out[i] = (phi, transmission(res))
    return out


def bound_states(
    grid: Grid2D,
    potential,
    shift: float,
    k: int,
    *,
    field: MagneticField | None = None,
    order: int = 2,
):
    """Eigenpairs of the closed (Dirichlet) reduced Hamiltonian near shift."""
    ham = assemble_hamiltonian_2d(
        grid, potential, order=order, method="dtbc", field=field, closed=True
    )
    b0 = field.b0 if field is not None else 0.0
    return shift_invert_eigs(ham.matrix(b0), shift, k)
