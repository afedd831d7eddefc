"""Normalized Gaussian heat deposition, its translation to the probe position,
and the scripted cut schedule (position, velocity, power over time).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SchedulingError
from .grid import Field3, Grid3


@dataclass(frozen=True)
class SourceSpec:
    """Gaussian deposition profile of the probe needle, radius sigma (m)."""

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ConfigurationError("source radius sigma must be positive")


def build_source(spec: SourceSpec, grid: Grid3) -> Field3:
    """Gaussian deposition centred at the coordinate origin, renormalized so
    the discrete volume integral over the grid equals 1 (units 1/m^3).

    The normalization constant is chosen from the discrete sum, not from the
    analytic Gaussian constant, so truncation by the box is already absorbed.
    """
    if spec.sigma < max(grid.spacing):
        warnings.warn(
            f"source radius {spec.sigma} m is below the grid spacing "
            f"{max(grid.spacing)} m; the deposition is under-resolved",
            stacklevel=2,
        )
    # Per-axis displacement from the coordinate origin, built as (i - c) * h so
    # nodes at +/- the same offset get bitwise-identical squared distances.
    d2 = []
    for ax in range(3):
        c = -grid.origin[ax] / grid.spacing[ax]
        d = (np.arange(grid.node_counts[ax]) - c) * grid.spacing[ax]
        d2.append(d * d)
    r2 = d2[0][:, None, None] + d2[1][None, :, None] + d2[2][None, None, :]
    g = np.exp(-r2 / (2.0 * spec.sigma**2))
    q0 = 1.0 / float(np.sum(g * grid.node_volumes()))
    return Field3(grid, q0 * g)


def lattice_shift(values: np.ndarray, shift: tuple[int, int, int]) -> np.ndarray:
    """Integer lattice shift with zero fill (values pushed past the edge drop)."""
    out = np.zeros_like(values)
    src = []
    dst = []
    for ax, s in enumerate(shift):
        n = values.shape[ax]
        if abs(s) >= n:
            return out
        if s >= 0:
            src.append(slice(0, n - s))
            dst.append(slice(s, n))
        else:
            src.append(slice(-s, n))
            dst.append(slice(0, n + s))
    out[tuple(dst)] = values[tuple(src)]
    return out


def shift_source(source: Field3, p, grid: Grid3 | None = None) -> Field3:
    """Translate the stored deposition field to probe position ``p``.

    The shift is rounded to the nearest node (error at most half a spacing)
    and moves each node's deposited mass (value times trapezoid cell volume),
    so boundary half-cells rescale when they land on interior nodes and the
    total discrete mass never increases: nonnegativity is preserved, values
    translated past the box are truncated, and nothing is gained.
    """
    grid = grid or source.grid
    if not grid.contains(p):
        raise SchedulingError(f"probe position {tuple(p)} lies outside the domain")
    shift = tuple(int(round(p[ax] / grid.spacing[ax])) for ax in range(3))
    vols = grid.node_volumes()
    # Volume ratio is exactly 1.0 wherever the cell weight class is unchanged,
    # so plain translations stay bitwise exact.
    ratio = lattice_shift(vols, shift) / vols
    return Field3(grid, lattice_shift(source.values, shift) * ratio)


@dataclass(frozen=True)
class CutSegment:
    """Constant-velocity, constant-power cut over [t_start, t_end)."""

    t_start: float            # s
    t_end: float              # s
    start: tuple[float, float, float]     # m
    velocity: tuple[float, float, float]  # m/s
    power: float              # W

    def __post_init__(self):
        if self.t_end <= self.t_start:
            raise SchedulingError(
                f"segment times must satisfy t_start < t_end, got "
                f"[{self.t_start}, {self.t_end}]"
            )
        if self.power < 0.0 or not np.isfinite(self.power):
            raise SchedulingError("segment power must be finite and >= 0")

    def end_point(self) -> np.ndarray:
        dt = self.t_end - self.t_start
        return np.array(self.start) + dt * np.array(self.velocity)


@dataclass(frozen=True)
class ProbeState:
    p: np.ndarray    # position (m)
    u: float         # power (W)
    v: np.ndarray    # velocity (m/s)


@dataclass(frozen=True)
class ProbeSchedule:
    """Time-ordered, non-overlapping cut segments; the probe parks with zero
    power in the gaps and after the last segment."""

    segments: tuple[CutSegment, ...]

    def __post_init__(self):
        segs = self.segments
        if not segs:
            raise SchedulingError("schedule needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if b.t_start < a.t_end:
                raise SchedulingError(
                    f"segments overlap: [{a.t_start}, {a.t_end}] then "
                    f"[{b.t_start}, {b.t_end}]"
                )

    def at(self, t: float) -> ProbeState:
        return probe_at(self, t)

    def validate_inside(self, grid: Grid3) -> None:
        """Feasibility: the integrated path stays inside the box (constant
        velocity per segment, so endpoints suffice)."""
        for n, seg in enumerate(self.segments):
            for label, pt in (("start", np.array(seg.start)), ("end", seg.end_point())):
                if not grid.contains(pt):
                    raise SchedulingError(
                        f"schedule segment {n}: {label} point {tuple(pt)} "
                        f"leaves the domain"
                    )

    def horizon(self) -> float:
        return self.segments[-1].t_end


def probe_at(schedule: ProbeSchedule, t: float) -> ProbeState:
    """Right-continuous piecewise evaluation of the probe state.

    Inside a segment the probe moves at its constant velocity with its power;
    in the gaps (and past the end) it rests at the previous endpoint with zero
    power. Before the first segment it rests at that segment's start.
    """
    if t < 0.0:
        raise SchedulingError(f"probe time must be >= 0, got {t}")
    zero = np.zeros(3)
    segs = schedule.segments
    if t < segs[0].t_start:
        return ProbeState(np.array(segs[0].start), 0.0, zero)
    for seg in segs:
        if seg.t_start <= t < seg.t_end:
            p = np.array(seg.start) + (t - seg.t_start) * np.array(seg.velocity)
            return ProbeState(p, seg.power, np.array(seg.velocity))
        if t < seg.t_start:
            break
        last = seg
    return ProbeState(last.end_point(), 0.0, zero)
