"""Transient 2D evolution on the reduced mesh.

Crank-Nicolson stepping with mode-resolved transparent boundary rows
(per-mode convolutions and gauge factors) or layer absorption with
interface-source injection; classical Runge-Kutta as the explicit
alternative.  Includes the magnetic-switching experiment driver.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field as dfield

import numpy as np
import scipy.sparse as sp

from . import dtbc
from .errors import ScenarioError
from .grid import Grid2D
from .linalg import lu_factor
from .potentials import Waveform, switching_waveform
from .sim1d import InterfaceSource, rk4_max_dt
from .units import HBAR, MSTAR
from .waveguide import (
    Hamiltonian2D,
    MagneticField,
    ModeBasis,
    StationaryResult,
    assemble_hamiltonian_2d,
    b0_for_flux,
    lead_basis,
    solve_scattering_2d,
)


class ModeHistories:
    """Per-terminal convolution data for the mode-resolved boundary rows.

    Stores the gauge-transformed boundary projections ``g^(l)``, l = 1..n,
    in a preallocated (capacity, M) buffer so the per-step convolution is a
    single matrix-vector product over the history.
    """

    def __init__(self, theta_m: np.ndarray, theta_e: float,
                 c_bnd: np.ndarray, c_in: np.ndarray):
        self.theta_m = theta_m
        self.theta_e = theta_e
        self.c_bnd = c_bnd
        self.c_in = c_in
        self._g = np.zeros((256, len(theta_m)), dtype=np.complex128)
        self._len = 0

    def eps(self, n: int) -> np.ndarray:
        return np.exp(2j * n * self.theta_m)

    def gamma(self, n: int) -> np.ndarray:
        return np.exp(2j * n * (self.theta_m - self.theta_e))

    def convolve(self, kernel: dtbc.ConvolutionKernel, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros_like(self.c_bnd)
        s = kernel.coefficients(n)[1 : n + 1][::-1]
        return s @ self._g[: self._len]

    def rhs(self, kernel: dtbc.ConvolutionKernel, n: int, d_in_n: np.ndarray) -> np.ndarray:
        """Boundary RHS for step ``n -> n+1``, divided by ``eps^(m,n+1)``."""
        s0 = kernel.s0()
        conv = self.convolve(kernel, n)
        raw = (
            conv
            - (self.eps(n) * d_in_n - self.gamma(n) * self.c_in)
            + self.gamma(n + 1) * (self.c_in - s0 * self.c_bnd)
        )
        return raw / self.eps(n + 1)

    def push(self, n1: int, d_bnd_new: np.ndarray) -> None:
        if self._len >= len(self._g):
            self._g = np.vstack([self._g, np.zeros_like(self._g)])
        self._g[self._len] = self.eps(n1) * d_bnd_new - self.gamma(n1) * self.c_bnd
        self._len += 1


def _terminal_blocks(basis: ModeBasis, s0: complex, side: str) -> np.ndarray:
    """Static dense boundary rows (after division by the epsilon factor)."""
    m = basis.m_count
    block = np.zeros((m, 2 * m), dtype=np.complex128)
    for mm in range(m):
        chi = basis.dx * basis.chi[:, mm]
        if side == "left":
            block[mm, :m] = -s0 * chi
            block[mm, m:] = chi
        else:
            block[mm, :m] = chi
            block[mm, m:] = -s0 * chi
    return block


@dataclass(frozen=True)
class Injection2D:
    e_kin: float
    lead: str = "left"
    amplitude: complex | None = None  # default 1/dx
    k_relation: str = "auto"
    decay_start: float | None = None  # amplitude ramp-down (layer runs only)
    decay_factor: float = 0.999


class CrankNicolson2D:
    """Crank-Nicolson evolution of the reduced-mesh waveguide problem."""

    def __init__(
        self,
        grid: Grid2D,
        potential,
        dt: float,
        *,
        method: str = "dtbc",
        order: int = 2,
        profile=None,
        field: MagneticField | None = None,
        b0_waveform: Waveform | None = None,
        injection: Injection2D | None = None,
        scattering: StationaryResult | None = None,
        initial: np.ndarray | None = None,
        hamiltonian: Hamiltonian2D | None = None,
        bases: tuple[ModeBasis, ModeBasis] | None = None,
    ):
        if method == "dtbc" and order != 2:
            raise ScenarioError("transparent boundary rows exist only at order 2")
        self.grid = grid
        self.dt = dt
        self.method = method
        self.order = order
        self.n = 0
        self.step_seconds: list[float] = []
        self.ham = hamiltonian or assemble_hamiltonian_2d(
            grid, potential, order=order, method=method, profile=profile,
            field=field,
        )
        self.b0_waveform = b0_waveform or Waveform.constant(
            field.b0 if field is not None else 0.0
        )
        if bases is not None:
            self.basis_l, self.basis_r = bases
        elif scattering is not None:
            self.basis_l, self.basis_r = scattering.basis_l, scattering.basis_r
        else:
            ord_b = order if method == "pml" else 2
            self.basis_l = lead_basis(grid, potential, ord_b, "left")
            self.basis_r = lead_basis(grid, potential, ord_b, "right")

        n_red = grid.n_reduced
        if initial is not None:
            self.psi = np.asarray(initial, dtype=np.complex128).copy()
        elif scattering is not None:
            self.psi = scattering.psi.copy()
        else:
            self.psi = np.zeros(n_red, dtype=np.complex128)

        self.amp = None
        e_total = 0.0
        if injection is not None:
            basis = self.basis_l if injection.lead == "left" else self.basis_r
            e_total = injection.e_kin + basis.energies[0]
            self.amp = (
                injection.amplitude if injection.amplitude is not None
                else 1.0 / grid.dx
            )
        self.e_total = e_total
        self.injection = injection
        self._lu = None
        self._b0_last = None

        if method == "dtbc":
            self.kernel = dtbc.ConvolutionKernel(grid.dx, dt)
            if injection is not None and injection.lead != "left":
                raise ScenarioError("transient injection implemented for the left lead")
            if injection is not None and injection.decay_start is not None:
                raise ScenarioError(
                    "incident amplitude ramp-down needs the layer method"
                )
            m_l, m_r = self.basis_l.m_count, self.basis_r.m_count
            th_l = np.arctan(dt * self.basis_l.energies / (2.0 * HBAR))
            th_r = np.arctan(dt * self.basis_r.energies / (2.0 * HBAR))
            th_e = math.atan(dt * e_total / (2.0 * HBAR))
            if scattering is not None:
                c0 = self.basis_l.project(self.psi[:m_l])
                c1 = self.basis_l.project(self.psi[m_l : 2 * m_l])
                cjm1 = self.basis_r.project(self.psi[n_red - 2 * m_r : n_red - m_r])
                cj = self.basis_r.project(self.psi[n_red - m_r :])
            else:
                c0 = c1 = np.zeros(m_l, dtype=np.complex128)
                cjm1 = cj = np.zeros(m_r, dtype=np.complex128)
            self.left = ModeHistories(th_l, th_e, c_bnd=c0, c_in=c1)
            self.right = ModeHistories(th_r, th_e, c_bnd=cj, c_in=cjm1)
            s0 = self.kernel.s0()
            self._block_l = _terminal_blocks(self.basis_l, s0, "left")
            self._block_r = _terminal_blocks(self.basis_r, s0, "right")
        elif method == "pml":
            self.kernel = None
            if injection is not None:
                self._setup_injection(injection)
        else:
            raise ScenarioError(f"unknown boundary method {method!r}")

    def _setup_injection(self, injection: Injection2D) -> None:
        grid = self.grid
        basis = self.basis_l if injection.lead == "left" else self.basis_r
        if injection.k_relation == "discrete" or (
            injection.k_relation == "auto" and self.order == 2
        ):
            k = dtbc.discrete_k(injection.e_kin, grid.dx, self.order)
            self._omega = dtbc.discrete_omega(self.e_total, self.dt)
        else:
            k = dtbc.continuous_k(injection.e_kin)
            self._omega = self.e_total / HBAR
        mask = np.zeros(grid.n_reduced, dtype=bool)
        block = np.zeros((grid.n1, grid.n2), dtype=np.complex128)
        if injection.lead == "left":
            for j1 in range(0, grid.dev_lo):
                mask[grid.column_reduced_indices(j1)] = True
            phase = np.exp(1j * k * grid.x1)
        else:
            for j1 in range(grid.dev_hi + 1, grid.n1):
                mask[grid.column_reduced_indices(j1)] = True
            phase = np.exp(-1j * k * (grid.x1 - grid.x1[grid.dev_hi]))
        block[:, basis.j21 : basis.j22 + 1] = (
            self.amp * phase[:, None] * basis.chi[:, 0][None, :]
        )
        self._inc_spatial = block.ravel()[grid.reduced_to_full]
        # (i dt hbar / 4 m*) * Laplacian on the reduced mesh, the kinetic
        # part of P with its sign flipped (P = I - kin + ...)
        kin_cn = sp.csr_matrix((0.5j * self.dt / HBAR) * self.ham.kinetic)
        self.source = InterfaceSource(kin_cn, mask)
        self._decay = 1.0

    # -- matrices ---------------------------------------------------------------

    def _ensure_factors(self, b0: float) -> None:
        if self._lu is not None and b0 == self._b0_last:
            return
        n = self.grid.n_reduced
        h = self.ham.matrix(b0)
        ident = sp.identity(n, format="csr", dtype=np.complex128)
        z = 0.5j * self.dt / HBAR
        p = ident + z * h
        self._q = sp.csr_matrix(ident - z * h)
        self._q.sort_indices()
        if self.method == "dtbc":
            m_l, m_r = self.basis_l.m_count, self.basis_r.m_count
            body = sp.csr_matrix(p)[m_l : n - m_r, :]
            top = sp.hstack(
                [sp.csr_matrix(self._block_l), sp.csr_matrix((m_l, n - 2 * m_l))],
                format="csr",
            )
            bottom = sp.hstack(
                [sp.csr_matrix((m_r, n - 2 * m_r)), sp.csr_matrix(self._block_r)],
                format="csr",
            )
            p = sp.vstack([top, body, bottom], format="csr")
        self._lu = lu_factor(sp.csr_matrix(p))
        self._b0_last = b0

    # -- stepping ---------------------------------------------------------------

    @property
    def time(self) -> float:
        return self.n * self.dt

    def step(self) -> None:
        tic = _time.perf_counter()
        t_half = (self.n + 0.5) * self.dt
        self._ensure_factors(self.b0_waveform(t_half))
        rhs = self._q @ self.psi
        n_red = self.grid.n_reduced
        if self.method == "dtbc":
            m_l, m_r = self.basis_l.m_count, self.basis_r.m_count
            d1 = self.basis_l.project(self.psi[m_l : 2 * m_l])
            djm1 = self.basis_r.project(self.psi[n_red - 2 * m_r : n_red - m_r])
            rhs[:m_l] = self.left.rhs(self.kernel, self.n, d1)
            rhs[n_red - m_r :] = self.right.rhs(self.kernel, self.n, djm1)
        elif self.injection is not None:
            inj = self.injection
            if inj.decay_start is not None and self.time >= inj.decay_start:
                self._decay *= inj.decay_factor
            inc_n = self._inc_spatial * (
                self._decay * np.exp(-1j * self._omega * self.n * self.dt)
            )
            inc_n1 = self._inc_spatial * (
                self._decay * np.exp(-1j * self._omega * (self.n + 1) * self.dt)
            )
            # P carries +z*H: scattered rows add the incident coupling
            rhs += self.source.build(inc_n1) + self.source.build(inc_n)
        psi_new = self._lu.solve(rhs)
        if self.method == "dtbc":
            m_l, m_r = self.basis_l.m_count, self.basis_r.m_count
            self.left.push(self.n + 1, self.basis_l.project(psi_new[:m_l]))
            self.right.push(self.n + 1, self.basis_r.project(psi_new[n_red - m_r :]))
        self.psi = psi_new
        self.n += 1
        self.step_seconds.append(_time.perf_counter() - tic)

    def run(self, n_steps: int) -> np.ndarray:
        for _ in range(n_steps):
            self.step()
        return self.psi

    def transmission_now(self) -> float:
        """Mode-0 transmission of the instantaneous field at the far lead."""
        basis = self.basis_r
        idx = self.grid.column_reduced_indices(self.grid.dev_hi)
        coef = basis.project(self.psi[idx])[0]
        return float(abs(coef / self.amp) ** 2) if self.amp else 0.0

    def device_norm(self) -> float:
        lo = self.grid.column_reduced_indices(self.grid.dev_lo)[0]
        hi = self.grid.column_reduced_indices(self.grid.dev_hi)[-1]
        return float(np.linalg.norm(self.psi[lo : hi + 1]) * self.grid.dx)


class RungeKutta2D:
    """Classical Runge-Kutta evolution on the reduced mesh (layer or box)."""

    def __init__(
        self,
        grid: Grid2D,
        potential,
        dt: float,
        *,
        method: str = "pml",
        order: int = 2,
        profile=None,
        field: MagneticField | None = None,
        b0_waveform: Waveform | None = None,
        injection: Injection2D | None = None,
        scattering: StationaryResult | None = None,
        initial: np.ndarray | None = None,
        hamiltonian: Hamiltonian2D | None = None,
        bases: tuple[ModeBasis, ModeBasis] | None = None,
        enforce_stability: bool = True,
    ):
        if method == "dtbc":
            raise ScenarioError(
                "explicit Runge-Kutta with transparent boundary rows is not supported"
            )
        if enforce_stability and dt > rk4_max_dt(grid.dx, 2):
            raise ScenarioError(
                f"dt = {dt} violates the 2D stability bound {rk4_max_dt(grid.dx, 2)}"
            )
        self.grid = grid
        self.dt = dt
        self.order = order
        self.n = 0
        self.step_seconds: list[float] = []
        self.ham = hamiltonian or assemble_hamiltonian_2d(
            grid, potential, order=order, method=method, profile=profile,
            field=field,
        )
        self.b0_waveform = b0_waveform or Waveform.constant(
            field.b0 if field is not None else 0.0
        )
        if bases is not None:
            self.basis_l, self.basis_r = bases
        elif scattering is not None:
            self.basis_l, self.basis_r = scattering.basis_l, scattering.basis_r
        else:
            self.basis_l = lead_basis(grid, potential, order, "left")
            self.basis_r = lead_basis(grid, potential, order, "right")
        if initial is not None:
            self.psi = np.asarray(initial, dtype=np.complex128).copy()
        elif scattering is not None:
            self.psi = scattering.psi.copy()
        else:
            self.psi = np.zeros(grid.n_reduced, dtype=np.complex128)
        self.injection = injection
        self.amp = None
        if injection is not None:
            basis = self.basis_l if injection.lead == "left" else self.basis_r
            self.e_total = injection.e_kin + basis.energies[0]
            self.amp = (
                injection.amplitude if injection.amplitude is not None
                else 1.0 / grid.dx
            )
            if injection.k_relation == "discrete":
                k = dtbc.discrete_k(injection.e_kin, grid.dx, order)
            else:
                k = dtbc.continuous_k(injection.e_kin)
            self._omega = self.e_total / HBAR
            mask = np.zeros(grid.n_reduced, dtype=bool)
            block = np.zeros((grid.n1, grid.n2), dtype=np.complex128)
            if injection.lead == "left":
                for j1 in range(0, grid.dev_lo):
                    mask[grid.column_reduced_indices(j1)] = True
                phase = np.exp(1j * k * grid.x1)
            else:
                for j1 in range(grid.dev_hi + 1, grid.n1):
                    mask[grid.column_reduced_indices(j1)] = True
                phase = np.exp(-1j * k * (grid.x1 - grid.x1[grid.dev_hi]))
            block[:, basis.j21 : basis.j22 + 1] = (
                self.amp * phase[:, None] * basis.chi[:, 0][None, :]
            )
            self._inc_spatial = block.ravel()[grid.reduced_to_full]
            f_kin = sp.csr_matrix((-1j / HBAR) * self.ham.kinetic)
            self.source = InterfaceSource(f_kin, mask)
            self._decay = 1.0

    @property
    def time(self) -> float:
        return self.n * self.dt

    def _f(self, t: float, psi: np.ndarray) -> np.ndarray:
        b0 = self.b0_waveform(t)
        out = (-1j / HBAR) * self.ham.apply(psi, b0)
        if self.injection is not None:
            amp_t = self._decay
            out += self.source.build(
                self._inc_spatial * (amp_t * np.exp(-1j * self._omega * t))
            )
        return out

    def step(self) -> None:
        tic = _time.perf_counter()
        inj = self.injection
        if inj is not None and inj.decay_start is not None and self.time >= inj.decay_start:
            self._decay *= inj.decay_factor
        t, h, psi = self.time, self.dt, self.psi
        k1 = self._f(t, psi)
        k2 = self._f(t + 0.5 * h, psi + 0.5 * h * k1)
        k3 = self._f(t + 0.5 * h, psi + 0.5 * h * k2)
        k4 = self._f(t + h, psi + h * k3)
        self.psi = psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        self.n += 1
        self.step_seconds.append(_time.perf_counter() - tic)

    def run(self, n_steps: int) -> np.ndarray:
        for _ in range(n_steps):
            self.step()
        return self.psi

    def transmission_now(self) -> float:
        basis = self.basis_r
        idx = self.grid.column_reduced_indices(self.grid.dev_hi)
        coef = basis.project(self.psi[idx])[0]
        return float(abs(coef / self.amp) ** 2) if self.amp else 0.0

    def device_norm(self) -> float:
        lo = self.grid.column_reduced_indices(self.grid.dev_lo)[0]
        hi = self.grid.column_reduced_indices(self.grid.dev_hi)[-1]
        return float(np.linalg.norm(self.psi[lo : hi + 1]) * self.grid.dx)


# ---------------------------------------------------------------------------
# Magnetic switching experiment


def run_aharonov_bohm(
    grid: Grid2D,
    potential,
    *,
    dt: float,
    t_end: float,
    e_kin: float = 21.5,
    flux_on: float = 1.0,
    t_on: float = 2.25,
    t_off: float = 6.25,
    ramp: float = 0.25,
    r0: float = 10.0,
    center: tuple[float, float] = (150.0, 45.0),
    method: str = "pml",
    integrator: str = "rk4",
    order: int = 2,
    profile=None,
    sample_every: int = 20,
    snapshot_every: int | None = None,
    decay_start: float | None = None,
    decay_factor: float = 0.999,
):
    """Transient scattering run with a switched encircled flux.

    The field ramps to ``flux_on`` flux quanta reaching it at ``t_on``, back
    to zero reaching it at ``t_off`` (cubic smoothstep over ``ramp``), and
    the initial state is the stationary scattering state at zero field.
    Returns sampled times, transmission, device norm and snapshots.
    """
    b1 = b0_for_flux(flux_on, r0)
    field = MagneticField(b0=1.0, r0=r0, center=center)
    ham = assemble_hamiltonian_2d(
        grid, potential, order=order, method=method, profile=profile, field=field
    )
    stationary = solve_scattering_2d(
        grid, potential, e_kin, method=method, order=order, profile=profile,
        field=MagneticField(b0=0.0, r0=r0, center=center), hamiltonian=ham,
    )
    b0_wave = switching_waveform([(0.0, 0.0), (t_on, b1), (t_off, 0.0)], ramp)
    injection = Injection2D(
        e_kin=e_kin, lead="left", decay_start=decay_start,
        decay_factor=decay_factor,
    )
    common = dict(
        method=method, order=order, profile=profile, b0_waveform=b0_wave,
        injection=injection, scattering=stationary, hamiltonian=ham,
    )
    if integrator == "rk4":
        stepper = RungeKutta2D(grid, potential, dt, **common)
    elif integrator == "cn":
        stepper = CrankNicolson2D(grid, potential, dt, **common)
    else:
        raise ScenarioError(f"unknown integrator {integrator!r}")

    n_steps = int(round(t_end / dt))
    times, trans, norms = [], [], []
    snapshots = []
    for n in range(n_steps):
        stepper.step()
        if stepper.n % sample_every == 0 or n == n_steps - 1:
            times.append(stepper.time)
            trans.append(stepper.transmission_now())
            norms.append(stepper.device_norm())
        if snapshot_every and stepper.n % snapshot_every == 0:
            snapshots.append((stepper.time, stepper.psi.copy()))
    return {
        "times": np.array(times),
        "transmission": np.array(trans),
        "device_norm": np.array(norms),
        "snapshots": snapshots,
        "stepper": stepper,
        "stationary": stationary,
    }
