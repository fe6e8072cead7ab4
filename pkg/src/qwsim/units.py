"""Internal unit system and unit-suffixed quantity parsing.

Internal units are nanometer (length), picosecond (time) and
milli-electron-volt (energy).  All public APIs take and return values in
these units; conversion happens only at the configuration boundary via
:func:`parse_quantity`.
"""
from __future__ import annotations

import math
import re

# Reduced Planck constant in meV ps (CODATA).
HBAR = 0.6582119569

# Speed of light in nm/ps.
_C_LIGHT = 299792.458

# Electron rest mass in meV ps^2 / nm^2 (from m_e c^2 = 510998.95 eV).
_M_ELECTRON = 510998.95e3 / _C_LIGHT**2

# Effective mass of electrons in GaAs, m* = 0.067 m_e.
MSTAR = 0.067 * _M_ELECTRON

# Elementary charge in internal units: e * (1 mV) = 1 meV.
ECHARGE = 1.0

# One tesla * nm^2 expressed in internal flux units (mV ps).
TESLA_NM2 = 1.0e-3

# Magnetic flux quantum h / (2e) in internal flux units (mV ps).
FLUX_QUANTUM = 2.0 * math.pi * HBAR / (2.0 * ECHARGE)


def flux_quantum_tesla_nm2() -> float:
    """Flux quantum expressed in T nm^2 (handy for B-field sweeps)."""
    return FLUX_QUANTUM / TESLA_NM2


# Multiplicative conversion to internal units, keyed by (dimension, suffix).
_UNIT_TABLE = {
    "length": {"nm": 1.0, "um": 1.0e3, "angstrom": 0.1},
    "time": {"ps": 1.0, "fs": 1.0e-3, "ns": 1.0e3},
    "energy": {"meV": 1.0, "eV": 1.0e3},
    "voltage": {"mV": 1.0, "V": 1.0e3},
    "magnetic_field": {"T": 1.0, "mT": 1.0e-3},
    "frequency": {"1/ps": 1.0, "ps^-1": 1.0, "1/s": 1.0e-12, "s^-1": 1.0e-12},
    "dimensionless": {"": 1.0},
}

_QUANTITY_RE = re.compile(r"^\s*([-+0-9.eE]+)\s*([A-Za-z/^\-0-9]*)\s*$")


class UnitError(ValueError):
    """A quantity string that cannot be parsed or has the wrong dimension."""


def parse_quantity(text: str | float | int, dimension: str) -> float:
    """Parse a quantity with unit suffix into internal units.

    ``text`` is either a string like ``"0.5 nm"`` / ``"0.1 fs"`` or a bare
    number (accepted only for dimensionless quantities).
    """
    table = _UNIT_TABLE.get(dimension)
    if table is None:
        raise UnitError(f"unknown dimension {dimension!r}")
    if isinstance(text, (int, float)):
        if dimension != "dimensionless":
            raise UnitError(
                f"bare number {text!r} needs a unit suffix for {dimension} "
                f"(one of {sorted(table)})"
            )
        return float(text)
    m = _QUANTITY_RE.match(text)
    if not m:
        raise UnitError(f"cannot parse quantity {text!r}")
    value, suffix = m.groups()
    if suffix not in table:
        raise UnitError(
            f"unit {suffix!r} is not a {dimension} unit (expected one of "
            f"{sorted(k for k in table if k)})"
        )
    return float(value) * table[suffix]
