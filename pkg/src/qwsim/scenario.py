"""Declarative scenario files: parsing, validation, canonical hashing.

Scenarios are TOML documents whose tables map 1:1 onto the solver inputs;
every physical quantity carries an explicit unit suffix.  Validation
rejects inconsistent combinations (transparent boundaries with high-order
interiors, explicit stepping beyond the stability bound) before any
computation starts.
"""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioError
from .grid import Grid1D, Grid2D, build_grid_1d, build_grid_2d, reduce_mesh
from .pml import PmlProfile
from .potentials import (
    Harmonic1D,
    Hold,
    ParabolicGuide,
    Ramp,
    RingGuide,
    SineMix,
    SmoothRamp,
    Waveform,
    Zero1D,
)
from .sim1d import Injection, rk4_max_dt
from .units import UnitError, parse_quantity


def _q(table: dict, key: str, dimension: str, default=None):
    if key not in table:
        if default is not None:
            return default
        raise ScenarioError(f"missing required key {key!r}")
    try:
        return parse_quantity(table[key], dimension)
    except UnitError as exc:
        raise ScenarioError(f"key {key!r}: {exc}") from exc


def _parse_waveform(table: dict | None, constant_key_value: float) -> Waveform:
    """Waveform from a list of segment tables, or a constant fallback."""
    if table is None:
        return Waveform.constant(constant_key_value)
    segments = []
    for seg in table:
        kind = seg.get("kind")
        dur = _q(seg, "duration", "time", math.inf if kind == "hold" else None)
        if kind == "hold":
            segments.append(Hold(_q(seg, "value", "voltage"), dur))
        elif kind == "ramp":
            segments.append(
                SmoothRamp(_q(seg, "from", "voltage"), _q(seg, "to", "voltage"), dur)
            )
        elif kind == "sines":
            comps = tuple(
                (
                    _q(c, "amplitude", "voltage"),
                    _q(c, "frequency", "frequency"),
                    float(c.get("phase", 0.0)),
                )
                for c in seg.get("components", [])
            )
            segments.append(SineMix(_q(seg, "offset", "voltage"), comps, dur))
        else:
            raise ScenarioError(f"unknown waveform segment kind {kind!r}")
    return Waveform(tuple(segments))


@dataclass
class Scenario:
    """Validated run description; fields are in internal units."""

    dimension: int
    device_length: float  # L (1D) or L1 (2D)
    l2: float | None
    dx: float
    method: str  # dtbc | pml
    order: int
    profile: PmlProfile | None
    potential: object
    integrator: str  # cn | rk4 | none (stationary)
    dt: float | None
    t_end: float | None
    injection: Injection | None
    magnetic: dict | None
    output: dict = field(default_factory=dict)
    eigs: dict | None = None
    raw: dict = field(default_factory=dict)
    text_hash: str = ""

    def build_grid_1d(self) -> Grid1D:
        return build_grid_1d(
            self.device_length,
            self.dx,
            pml=self.method == "pml",
            d0=self.profile.d0 if self.profile else 40.0,
        )

    def build_grid_2d(self) -> Grid2D:
        geo = build_grid_2d(
            self.device_length,
            self.l2,
            self.dx,
            pml=self.method == "pml",
            d0=self.profile.d0 if self.profile else 40.0,
        )
        x1 = np.arange(geo["n1"]) * self.dx + geo["x1_0"]
        x2 = np.arange(geo["n2"]) * self.dx
        v = self.potential.values(x1, x2)
        threshold = self.raw.get("grid", {}).get("elimination_threshold_meV", 750.0)
        return reduce_mesh(geo, v, float(threshold))


def canonical_hash(parsed: dict) -> str:
    text = json.dumps(parsed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_scenario(path: str) -> Scenario:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return scenario_from_dict(data)


def scenario_from_dict(data: dict) -> Scenario:
    model = data.get("model", {})
    dimension = int(model.get("dimension", 1))
    if dimension not in (1, 2):
        raise ScenarioError(f"dimension must be 1 or 2, got {dimension}")

    grid_t = data.get("grid")
    if grid_t is None:
        raise ScenarioError("missing [grid] table")
    dx = _q(grid_t, "dx", "length")
    length = _q(grid_t, "device_length", "length")
    l2 = _q(grid_t, "l2", "length") if dimension == 2 else None

    boundary = data.get("boundary", {})
    method = boundary.get("method", "dtbc")
    if method not in ("dtbc", "pml"):
        raise ScenarioError(f"boundary method must be dtbc or pml, got {method!r}")
    profile = None
    if method == "pml":
        profile = PmlProfile(
            sigma0=float(boundary.get("sigma0", 0.02)),
            p=int(boundary.get("exponent", 3)),
            d0=_q(boundary, "d0", "length", 40.0),
            end_condition=boundary.get("end_condition", "neumann"),
        )

    numerics = data.get("numerics", {})
    order = int(numerics.get("order", 2))
    if order not in (2, 4, 6):
        raise ScenarioError(f"order must be 2, 4 or 6, got {order}")
    integrator = numerics.get("integrator", "none")
    dt = _q(numerics, "dt", "time") if "dt" in numerics else None
    t_end = _q(numerics, "t_end", "time") if "t_end" in numerics else None

    if method == "dtbc" and order != 2:
        raise ScenarioError(
            "transparent boundary rows are derived for the second-order "
            "scheme only; use order = 2 or the layer method"
        )
    if method == "dtbc" and integrator == "rk4":
        raise ScenarioError(
            "explicit Runge-Kutta cannot drive transparent boundary rows; "
            "use the Crank-Nicolson integrator or the layer method"
        )
    if integrator == "rk4":
        if dt is None:
            raise ScenarioError("rk4 integrator needs dt")
        bound = rk4_max_dt(dx, dimension)
        if dt > bound:
            raise ScenarioError(
                f"rk4 dt = {dt} ps violates the stability bound "
                f"{bound:.4e} ps at dx = {dx} nm (N = {dimension})"
            )

    pot_t = data.get("potential", {"kind": "zero"})
    kind = pot_t.get("kind", "zero")
    if dimension == 1:
        if kind == "zero":
            potential = Zero1D()
        elif kind == "ramp":
            wave = _parse_waveform(
                pot_t.get("voltage_waveform"),
                _q(pot_t, "voltage", "voltage", 0.0),
            )
            potential = Ramp(
                a0=_q(pot_t, "a0", "length"), a1=_q(pot_t, "a1", "length"), U=wave
            )
        elif kind == "harmonic":
            potential = Harmonic1D(
                omega=_q(pot_t, "omega", "frequency"),
                center=_q(pot_t, "center", "length", 0.0),
            )
        else:
            raise ScenarioError(f"unknown 1D potential kind {kind!r}")
    else:
        if kind == "parabolic_guide":
            potential = ParabolicGuide(omega=_q(pot_t, "omega", "frequency"), L2=l2)
        elif kind == "ring":
            potential = RingGuide(
                L1=length,
                L2=l2,
                omega=_q(pot_t, "omega", "frequency", 100.0),
                radius=_q(pot_t, "radius", "length", 30.0),
                clip=_q(pot_t, "clip", "energy", 1000.0),
            )
        else:
            raise ScenarioError(f"unknown 2D potential kind {kind!r}")

    injection = None
    if "injection" in data:
        inj_t = data["injection"]
        injection = Injection(
            lead=inj_t.get("lead", "left"),
            e_kin=_q(inj_t, "e_kin", "energy"),
            amplitude=float(inj_t.get("amplitude", 1.0)),
            k_relation=inj_t.get("k_relation", "auto"),
        )
        if injection.lead not in ("left", "right"):
            raise ScenarioError(f"injection lead must be left or right")

    magnetic = None
    if "magnetic" in data:
        mag = data["magnetic"]
        magnetic = {
            "flux_quanta": float(mag.get("flux_quanta", 0.0)),
            "r0": _q(mag, "r0", "length", 10.0),
            "t_on": _q(mag, "t_on", "time", 2.25),
            "t_off": _q(mag, "t_off", "time", 6.25),
            "ramp": _q(mag, "ramp", "time", 0.25),
        }

    return Scenario(
        dimension=dimension,
        device_length=length,
        l2=l2,
        dx=dx,
        method=method,
        order=order,
        profile=profile,
        potential=potential,
        integrator=integrator,
        dt=dt,
        t_end=t_end,
        injection=injection,
        magnetic=magnetic,
        output=data.get("output", {}),
        eigs=data.get("eigs"),
        raw=data,
        text_hash=canonical_hash(data),
    )
