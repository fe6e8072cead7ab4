"""Equidistant spatial meshes with device/PML zoning and mesh reduction.

1D grids either span exactly the device ``[0, L]`` (transparent-boundary
runs) or the extended domain ``[x*_l - d0, x*_r + d0]`` with the device
nested inside the unstretched region (absorbing-layer runs).  2D grids share
one mesh size for both axes and support elimination of grid points where a
confining potential exceeds a threshold, yielding a reduced mesh with
bijective full/reduced index maps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridError


def _commensurate(length: float, dx: float, what: str) -> int:
    n = length / dx
    n_round = round(n)
    rem = abs(n - n_round)
    if rem > 1e-9 * max(1.0, abs(n)):
        raise GridError(
            f"{what} = {length} is not commensurate with dx = {dx}: "
            f"{what}/dx = {n} (remainder {rem:.3e} grid units)"
        )
    if n_round <= 0:
        raise GridError(f"{what}/dx must be a positive integer, got {n}")
    return int(n_round)


@dataclass(frozen=True)
class Grid1D:
    """Equidistant 1D grid; ``x_j = x0 + j*dx`` for ``j in [0, n_points)``."""

    x0: float
    dx: float
    n_points: int
    dev_lo: int
    dev_hi: int
    pml_onsets: tuple[float, float] | None = None
    d0: float = 0.0

    def __post_init__(self):
        if self.dx <= 0:
            raise GridError(f"dx must be positive, got {self.dx}")
        if not (0 <= self.dev_lo <= self.dev_hi < self.n_points):
            raise GridError("device range outside grid")

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n_points)

    @property
    def device_length(self) -> float:
        return (self.dev_hi - self.dev_lo) * self.dx

    @property
    def device_slice(self) -> slice:
        return slice(self.dev_lo, self.dev_hi + 1)

    @property
    def has_pml(self) -> bool:
        return self.pml_onsets is not None


def build_grid_1d(
    device_length: float,
    dx: float,
    *,
    pml: bool = False,
    d0: float = 40.0,
    onset_offset_cells: int = 2,
) -> Grid1D:
    """Build a 1D grid spanning the device, optionally extended by layers.

    Without layers the grid is exactly ``{j*dx, j=0..J}`` with ``J*dx = L``.
    With layers, onsets sit ``onset_offset_cells`` grid cells outside the
    device so the device-interior finite-difference equations are unaffected
    by the coordinate stretch, and the grid spans ``[x*_l-d0, x*_r+d0]``.
    """
    if dx <= 0:
        raise GridError(f"dx must be positive, got {dx}")
    nj = _commensurate(device_length, dx, "device length")
    if not pml:
        return Grid1D(x0=0.0, dx=dx, n_points=nj + 1, dev_lo=0, dev_hi=nj)
    if d0 <= 0:
        raise GridError(f"layer width d0 must be positive, got {d0}")
    if onset_offset_cells < 2:
        raise GridError("layer onsets must sit at least 2 cells outside the device")
    nd = _commensurate(d0, dx, "layer width d0")
    x_star_l = -onset_offset_cells * dx
    x_star_r = device_length + onset_offset_cells * dx
    n_ext = nd + onset_offset_cells
    n_points = nj + 2 * n_ext + 1
    return Grid1D(
        x0=x_star_l - d0,
        dx=dx,
        n_points=n_points,
        dev_lo=n_ext,
        dev_hi=n_ext + nj,
        pml_onsets=(x_star_l, x_star_r),
        d0=d0,
    )


@dataclass(frozen=True)
class Grid2D:
    """Reduced 2D mesh over ``[x1_0, ...] x [0, L2]`` with index maps.

    The full grid has ``n1`` columns and ``n2`` transverse points including
    the Dirichlet rows ``j2 = 0`` and ``j2 = n2-1``.  Full indices are
    ``j = j1*n2 + j2``; retained points are numbered consecutively in that
    order, so the first/last ``M`` reduced indices are the retained points
    of the first/last column.
    """

    dx: float
    n1: int
    n2: int
    x1_0: float
    L1: float
    L2: float
    dev_lo: int
    dev_hi: int
    full_to_reduced: np.ndarray = field(repr=False)
    reduced_to_full: np.ndarray = field(repr=False)
    lead_range_left: tuple[int, int]
    lead_range_right: tuple[int, int]
    pml_onsets: tuple[float, float] | None = None
    d0: float = 0.0

    @property
    def n_reduced(self) -> int:
        return len(self.reduced_to_full)

    @property
    def x1(self) -> np.ndarray:
        return self.x1_0 + self.dx * np.arange(self.n1)

    @property
    def x2(self) -> np.ndarray:
        return self.dx * np.arange(self.n2)

    def full_index(self, j1: int, j2: int) -> int:
        return j1 * self.n2 + j2

    def column_reduced_indices(self, j1: int) -> np.ndarray:
        """Reduced indices of the retained points in column ``j1``."""
        col = self.full_to_reduced[j1 * self.n2 : (j1 + 1) * self.n2]
        return col[col >= 0]

    def scatter_to_full(self, reduced_values: np.ndarray, fill=0.0) -> np.ndarray:
        """Embed a reduced-mesh field into the full (n1, n2) grid."""
        out = np.full(self.n1 * self.n2, fill, dtype=reduced_values.dtype)
        out[self.reduced_to_full] = reduced_values
        return out.reshape(self.n1, self.n2)

    @property
    def has_pml(self) -> bool:
        return self.pml_onsets is not None


def build_grid_2d(
    L1: float,
    L2: float,
    dx: float,
    *,
    pml: bool = False,
    d0: float = 40.0,
    onset_offset_cells: int = 2,
) -> dict:
    """Geometry of the full 2D grid before mesh reduction.

    Returns the column layout along ``x1`` (reusing the 1D zoning rules) plus
    the transverse point count.  :func:`reduce_mesh` turns this into a
    :class:`Grid2D` once the potential is known.
    """
    gx = build_grid_1d(L1, dx, pml=pml, d0=d0, onset_offset_cells=onset_offset_cells)
    n2 = _commensurate(L2, dx, "transverse extent L2") + 1
    return {
        "dx": dx,
        "n1": gx.n_points,
        "n2": n2,
        "x1_0": gx.x0,
        "L1": L1,
        "L2": L2,
        "dev_lo": gx.dev_lo,
        "dev_hi": gx.dev_hi,
        "pml_onsets": gx.pml_onsets,
        "d0": gx.d0,
    }


def reduce_mesh(geometry: dict, v_full: np.ndarray, threshold: float = 750.0) -> Grid2D:
    """Eliminate grid points where the potential exceeds ``threshold``.

    ``v_full`` holds the time-independent confining potential on the full
    grid, shape ``(n1, n2)``.  Dirichlet rows ``j2 = 0`` and ``j2 = n2-1``
    are always eliminated.  The retained transverse range in each lead
    column must be contiguous, otherwise the transverse mode decomposition
    at the terminals is undefined.
    """
    n1, n2 = geometry["n1"], geometry["n2"]
    if v_full.shape != (n1, n2):
        raise GridError(f"potential sample shape {v_full.shape} != {(n1, n2)}")
    keep = v_full <= threshold
    keep[:, 0] = False
    keep[:, n2 - 1] = False

    flat = keep.ravel()
    reduced_to_full = np.flatnonzero(flat)
    full_to_reduced = -np.ones(n1 * n2, dtype=np.int64)
    full_to_reduced[reduced_to_full] = np.arange(len(reduced_to_full))

    def lead_range(j1: int) -> tuple[int, int]:
        js = np.flatnonzero(keep[j1])
        if len(js) == 0:
            raise GridError(f"no retained points in lead column j1={j1}")
        if js[-1] - js[0] + 1 != len(js):
            raise GridError(
                f"retained transverse indices in lead column j1={j1} are not "
                "contiguous; transverse mode decomposition undefined"
            )
        return int(js[0]), int(js[-1])

    lead_left = lead_range(0)
    lead_right = lead_range(n1 - 1)
    # Exterior columns must share the lead profile for open boundaries:
    # verify all columns outside the device carry identical retained ranges.
    for j1 in range(0, geometry["dev_lo"] + 1):
        if lead_range(j1) != lead_left:
            raise GridError("retained range varies across left-lead columns")
    for j1 in range(geometry["dev_hi"], n1):
        if lead_range(j1) != lead_right:
            raise GridError("retained range varies across right-lead columns")

    return Grid2D(
        dx=geometry["dx"],
        n1=n1,
        n2=n2,
        x1_0=geometry["x1_0"],
        L1=geometry["L1"],
        L2=geometry["L2"],
        dev_lo=geometry["dev_lo"],
        dev_hi=geometry["dev_hi"],
        full_to_reduced=full_to_reduced,
        reduced_to_full=reduced_to_full,
        lead_range_left=lead_left,
        lead_range_right=lead_right,
        pml_onsets=geometry["pml_onsets"],
        d0=geometry["d0"],
    )
