"""Potential energy models, ring geometry, and time-dependent waveforms.

All potentials split into a static part and an optional applied-voltage
modulation, ``V(x, t) = V_static(x) + U(t) * V_shape(x)``, which keeps
time stepping cheap (one diagonal update per step) and keeps the lead
potentials spatially constant at every time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError
from .units import ECHARGE, MSTAR

# ---------------------------------------------------------------------------
# Waveforms


@dataclass(frozen=True)
class Hold:
    value: float
    duration: float


@dataclass(frozen=True)
class SmoothRamp:
    """Cubic-smoothstep transition from ``v0`` to ``v1`` over ``duration``."""

    v0: float
    v1: float
    duration: float

    def value(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        return self.v0 + (self.v1 - self.v0) * u * u * (3.0 - 2.0 * u)


@dataclass(frozen=True)
class SineMix:
    """Offset plus a sum of sinusoids, evaluated on segment-local time."""

    offset: float
    components: tuple[tuple[float, float, float], ...]  # (amplitude, freq, phase)
    duration: float

    def value(self, t_local: float) -> float:
        out = self.offset
        for amp, freq, phase in self.components:
            out += amp * math.sin(2.0 * math.pi * freq * t_local + phase)
        return out


Segment = Hold | SmoothRamp | SineMix


@dataclass(frozen=True)
class Waveform:
    """Piecewise waveform; constant extension beyond the last segment."""

    segments: tuple[Segment, ...]

    @staticmethod
    def constant(value: float) -> "Waveform":
        return Waveform((Hold(value, math.inf),))

    def __call__(self, t: float) -> float:
        t0 = 0.0
        last = 0.0
        for seg in self.segments:
            if t < t0 + seg.duration:
                tl = t - t0
                if isinstance(seg, Hold):
                    return seg.value
                if isinstance(seg, SmoothRamp):
                    return seg.value(tl / seg.duration)
                return seg.value(tl)
            t0 += seg.duration
            if isinstance(seg, Hold):
                last = seg.value
            elif isinstance(seg, SmoothRamp):
                last = seg.v1
            else:
                last = seg.value(seg.duration)
        return last

    def sample(self, times: np.ndarray) -> np.ndarray:
        return np.array([self(t) for t in np.atleast_1d(times)])

    @property
    def is_constant(self) -> bool:
        return all(isinstance(s, Hold) for s in self.segments) and len(
            {s.value for s in self.segments}
        ) <= 1


def switching_waveform(
    levels: list[tuple[float, float]], ramp_time: float
) -> Waveform:
    """Hold/ramp/hold/... waveform through ``(t_start, value)`` breakpoints.

    Each level holds from its start time until the next breakpoint, where a
    cubic-smoothstep ramp of width ``ramp_time`` moves to the next value.
    """
    segs: list[Segment] = []
    for i, (t_start, value) in enumerate(levels):
        if i + 1 < len(levels):
            t_next = levels[i + 1][0]
            hold = t_next - t_start - (ramp_time if i + 1 < len(levels) else 0.0)
            if hold < 0:
                raise ScenarioError("switching breakpoints closer than ramp time")
            segs.append(Hold(value, hold))
            segs.append(SmoothRamp(value, levels[i + 1][1], ramp_time))
        else:
            segs.append(Hold(value, math.inf))
    return Waveform(tuple(segs))


# ---------------------------------------------------------------------------
# 1D potentials


@dataclass(frozen=True)
class Ramp:
    """Zero left plateau, linear ramp on [a0, a1], then constant -e*U."""

    a0: float
    a1: float
    U: Waveform  # applied voltage in mV

    def shape(self, x: np.ndarray) -> np.ndarray:
        s = np.clip((np.asarray(x, dtype=float) - self.a0) / (self.a1 - self.a0), 0.0, 1.0)
        return -ECHARGE * s

    def static(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def lead_values(self, t: float) -> tuple[float, float]:
        return 0.0, -ECHARGE * self.U(t)


@dataclass(frozen=True)
class Harmonic1D:
    """Harmonic confinement m* omega^2 (x - center)^2 / 2 (closed systems)."""

    omega: float  # 1/ps
    center: float = 0.0

    def static(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 0.5 * MSTAR * self.omega**2 * (x - self.center) ** 2

    def shape(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def lead_values(self, t: float) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class Zero1D:
    def static(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def shape(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def lead_values(self, t: float) -> tuple[float, float]:
        return 0.0, 0.0


@dataclass(frozen=True)
class Tabulated1D:
    x_nodes: np.ndarray
    values: np.ndarray

    def static(self, x: np.ndarray) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.x_nodes, self.values)

    def shape(self, x: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(x, dtype=float))

    def lead_values(self, t: float) -> tuple[float, float]:
        return float(self.values[0]), float(self.values[-1])


def evaluate_potential(p, x, t: float = 0.0):
    """Pointwise potential value(s) at time ``t`` (pure function)."""
    x = np.asarray(x, dtype=float)
    u = p.U(t) if hasattr(p, "U") else 0.0
    return p.static(x) + u * p.shape(x)


# ---------------------------------------------------------------------------
# 2D potentials


@dataclass(frozen=True)
class ParabolicGuide:
    """Straight waveguide with parabolic cross section centered at L2/2."""

    omega: float  # 1/ps
    L2: float
    clip: float = math.inf

    def values(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        v = 0.5 * MSTAR * self.omega**2 * (x2[None, :] - self.L2 / 2.0) ** 2
        v = np.broadcast_to(v, (len(x1), len(x2))).copy()
        return np.minimum(v, self.clip)

    def lead_profile(self, x2: np.ndarray) -> np.ndarray:
        return np.minimum(
            0.5 * MSTAR * self.omega**2 * (x2 - self.L2 / 2.0) ** 2, self.clip
        )


def _smooth_min(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """C1 smooth minimum; equals min(a, b) wherever |a - b| >= s."""
    if s <= 0:
        return np.minimum(a, b)
    h = np.clip(s - np.abs(a - b), 0.0, None)
    return np.minimum(a, b) - h * h / (4.0 * s)


@dataclass(frozen=True)
class RingGuide:
    """Ring-shaped waveguide: two lead half-lines joined to a circle.

    The potential is a transverse parabola applied to the distance from a
    centerline made of the half-lines ``x2 = x2_center`` for
    ``x1 <= ring_center_x1 - radius`` / ``x1 >= ring_center_x1 + radius``
    plus the circle of given radius.  Distances are blended with a C1
    smooth-min near the junctions; the blend is inactive in the exterior
    domains, so the lead potential depends on the transverse coordinate only.

    Defaults fit the ring inside a 90 nm strip: the clip plateau fills the
    ring interior beyond ~10 nm of the center, so the field region of an
    encircled flux tube carries no density, and the channel stays open at
    the top and bottom of the ring.
    """

    L1: float
    L2: float
    omega: float = 100.0  # 1/ps
    radius: float = 30.0
    center: tuple[float, float] = (150.0, 45.0)
    blend: float = 10.0
    clip: float = 1000.0

    def _distance(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        c1, c2 = self.center
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        # Left lead half-line ends at the circle's leftmost point.
        dxl = np.clip(X1 - (c1 - self.radius), 0.0, None)
        d_left = np.hypot(dxl, X2 - c2)
        dxr = np.clip((c1 + self.radius) - X1, 0.0, None)
        d_right = np.hypot(dxr, X2 - c2)
        r = np.hypot(X1 - c1, X2 - c2)
        d_circle = np.abs(r - self.radius)
        d = _smooth_min(d_left, d_right, self.blend)
        d = _smooth_min(d, d_circle, self.blend)
        # The smooth-min undershoots min(a, b) near the junctions where both
        # arguments vanish; a negative distance is geometric nonsense, and
        # V ~ d^2 keeps C1 smoothness under the clip.
        return np.clip(d, 0.0, None)

    def values(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        d = self._distance(np.asarray(x1, float), np.asarray(x2, float))
        return np.minimum(0.5 * MSTAR * self.omega**2 * d * d, self.clip)

    def lead_profile(self, x2: np.ndarray) -> np.ndarray:
        c2 = self.center[1]
        return np.minimum(
            0.5 * MSTAR * self.omega**2 * (np.asarray(x2, float) - c2) ** 2, self.clip
        )


@dataclass(frozen=True)
class Tabulated2D:
    values_full: np.ndarray  # (n1, n2) sample on the full grid

    def values(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        if self.values_full.shape != (len(x1), len(x2)):
            raise ScenarioError("tabulated potential shape mismatch")
        return self.values_full

    def lead_profile(self, x2: np.ndarray) -> np.ndarray:
        return self.values_full[0]
