import numpy as np
import pytest

from qwsim import stencils
from qwsim.grid import build_grid_1d
from qwsim.pml import PmlProfile, build_stretched_d2, stretch_factor


@pytest.fixture
def grid():
    return build_grid_1d(120.0, 0.5, pml=True, d0=40.0)


def test_stretch_factor_is_one_between_onsets(grid):
    prof = PmlProfile()
    xl, xr = grid.pml_onsets
    x = np.linspace(xl, xr, 13)
    assert np.all(stretch_factor(prof, x, xl, xr) == 1.0 + 0.0j)


def test_stretch_factor_forty_nm_into_the_layer():
    prof = PmlProfile(sigma0=0.02, p=3, d0=40.0)
    xl, xr = -1.0, 121.0
    c = stretch_factor(prof, xr + 40.0, xl, xr)
    expected = 1.0 / (1.0 + np.exp(1j * np.pi / 4) * 0.02 * 40.0**3)
    assert c == pytest.approx(expected, rel=1e-14)
    assert abs(c) < 1e-3  # strong absorption deep in the layer


def test_stretch_factor_vanishes_for_large_sigma():
    prof = PmlProfile(sigma0=1e6, p=3, d0=40.0)
    assert abs(stretch_factor(prof, 200.0, -1.0, 121.0)) < 1e-8


def test_sigma_nonnegative_and_smooth_at_onset(grid):
    prof = PmlProfile()
    xl, xr = grid.pml_onsets
    x = grid.x
    s = prof.sigma(x, xl, xr)
    assert np.all(s >= 0)
    # p=3 profile has two continuous derivatives at the onsets
    ds = prof.sigma_prime(x, xl, xr)
    assert abs(np.interp(xl, x, ds)) < 1e-12
    assert abs(np.interp(xr, x, ds)) < 1e-12


def test_zero_absorption_matches_plain_operator_bitwise(grid):
    prof = PmlProfile(sigma0=0.0)
    stretched = build_stretched_d2(prof, 4, grid)
    plain = stencils.d2(4, grid.dx, grid.n_points, "neumann")
    assert (stretched != plain).nnz == 0


@pytest.mark.parametrize("order", [2, 4, 6])
def test_interior_rows_identical_to_plain_d2(order, grid):
    prof = PmlProfile()
    stretched = build_stretched_d2(prof, order, grid)
    plain = stencils.d2(order, grid.dx, grid.n_points, "neumann")
    # rows fully inside the unstretched window
    h = stencils.half_width(order)
    lo = grid.dev_lo + h
    hi = grid.dev_hi - h
    diff = (stretched[lo:hi] - plain[lo:hi])
    assert diff.nnz == 0


def test_missing_zoning_rejected():
    from qwsim.errors import GridError

    bare = build_grid_1d(120.0, 0.5)
    with pytest.raises(GridError):
        build_stretched_d2(PmlProfile(), 2, bare)
