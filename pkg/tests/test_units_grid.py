import math

import numpy as np
import pytest

from qwsim import units
from qwsim.errors import GridError
from qwsim.grid import build_grid_1d, build_grid_2d, reduce_mesh
from qwsim.units import UnitError, parse_quantity


def test_hbar_and_effective_mass():
    assert units.HBAR == 0.6582119569
    # hbar^2/(2 m*) for GaAs is about 568.7 meV nm^2
    assert units.HBAR**2 / (2 * units.MSTAR) == pytest.approx(568.66, rel=1e-3)


def test_flux_quantum_in_tesla_nm2():
    # h/(2e) = 2067.83 T nm^2
    assert units.flux_quantum_tesla_nm2() == pytest.approx(2067.83, rel=1e-4)


def test_voltage_to_energy_convention():
    # -e*U with U = -25 mV must give +25 meV
    u = parse_quantity("-25 mV", "voltage")
    assert -units.ECHARGE * u == 25.0


@pytest.mark.parametrize(
    "text,dim,expected",
    [
        ("0.5 nm", "length", 0.5),
        ("0.1 fs", "time", 1e-4),
        ("25 meV", "energy", 25.0),
        ("0.25e14 s^-1", "frequency", 25.0),
        ("6.58 T", "magnetic_field", 6.58),
    ],
)
def test_parse_quantity(text, dim, expected):
    assert parse_quantity(text, dim) == pytest.approx(expected)


def test_parse_quantity_rejects_wrong_unit():
    with pytest.raises(UnitError):
        parse_quantity("25 nm", "energy")
    with pytest.raises(UnitError):
        parse_quantity(0.5, "length")


def test_dtbc_grid_matches_device():
    g = build_grid_1d(120.0, 0.5)
    assert g.n_points == 241
    assert g.x[0] == 0.0
    assert g.x[-1] == pytest.approx(120.0)
    assert (g.dev_lo, g.dev_hi) == (0, 240)


def test_pml_grid_layout():
    g = build_grid_1d(120.0, 0.5, pml=True, d0=40.0)
    assert g.pml_onsets == (-1.0, 121.0)
    assert g.x[0] == pytest.approx(-41.0)
    assert g.x[-1] == pytest.approx(161.0)
    assert g.n_points == 405
    assert g.x[g.dev_lo] == pytest.approx(0.0)
    assert g.x[g.dev_hi] == pytest.approx(120.0)


def test_zero_dx_rejected():
    with pytest.raises(GridError):
        build_grid_1d(120.0, 0.0)


def test_incommensurate_length_reports_remainder():
    with pytest.raises(GridError, match="remainder"):
        build_grid_1d(120.1, 0.5)


def test_reduce_mesh_identity_when_uniform():
    geo = build_grid_2d(10.0, 5.0, 1.0)
    v = np.zeros((geo["n1"], geo["n2"]))
    g = reduce_mesh(geo, v, threshold=750.0)
    # only the Dirichlet rows are eliminated
    assert g.n_reduced == geo["n1"] * (geo["n2"] - 2)
    # round trip full -> reduced -> full is the identity on retained points
    assert np.array_equal(
        g.reduced_to_full, np.flatnonzero(g.full_to_reduced >= 0)
    )
    r = g.full_to_reduced[g.reduced_to_full]
    assert np.array_equal(r, np.arange(g.n_reduced))
    assert g.lead_range_left == (1, geo["n2"] - 2)


def test_reduce_mesh_eliminates_high_potential():
    geo = build_grid_2d(10.0, 10.0, 1.0)
    v = np.zeros((geo["n1"], geo["n2"]))
    v[:, :3] = 1000.0  # clip a band near the bottom everywhere
    g = reduce_mesh(geo, v, threshold=750.0)
    assert g.lead_range_left == (3, geo["n2"] - 2)
    assert g.n_reduced == geo["n1"] * (geo["n2"] - 2 - 2)


def test_reduce_mesh_rejects_disconnected_lead():
    geo = build_grid_2d(10.0, 10.0, 1.0)
    v = np.zeros((geo["n1"], geo["n2"]))
    v[:, 5] = 1000.0  # split every column, leads included
    with pytest.raises(GridError, match="contiguous"):
        reduce_mesh(geo, v, threshold=750.0)


def test_scatter_to_full_round_trip():
    geo = build_grid_2d(6.0, 4.0, 1.0)
    v = np.zeros((geo["n1"], geo["n2"]))
    g = reduce_mesh(geo, v)
    vals = np.arange(g.n_reduced, dtype=complex)
    full = g.scatter_to_full(vals)
    assert full.shape == (geo["n1"], geo["n2"])
    assert np.all(full[:, 0] == 0) and np.all(full[:, -1] == 0)
    kept = full.ravel()[g.reduced_to_full]
    assert np.array_equal(kept, vals)
