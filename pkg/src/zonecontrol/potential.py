"""One period of a 1D potential: rectangular steps, delta spikes, and an
optional tabulated smooth overlay.

Units: hbar^2/2m = 1, so free motion has E = k^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ValidationError

WIDTH_TOL = 1e-12
DEFAULT_OVERLAY_POINTS = 2048


@dataclass(frozen=True)
class Segment:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValidationError(f"segment width must be positive, got {self.width}")
        if not math.isfinite(self.height):
            raise ValidationError("segment height must be finite")


@dataclass(frozen=True)
class DeltaSpike:
    position: float
    strength: float

    def __post_init__(self):
        if not math.isfinite(self.strength):
            raise ValidationError("spike strength must be finite")


@dataclass(frozen=True, eq=False)
class Overlay:
    """Tabulated addition to the step potential.

    ``values[j]`` is the overlay at ``x = j * grid_step`` for ``j = 0..N`` with
    ``N * grid_step == period``. The right endpoint is stored separately from
    ``values[0]`` so a jump across the period boundary survives interpolation.
    """

    grid_step: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValidationError("overlay needs at least two grid values")
        if not np.all(np.isfinite(values)):
            raise ValidationError("overlay values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_cells(self) -> int:
        return self.values.size - 1

    def local(self, u):
        """Linear interpolation at local coordinates ``u`` in [0, period]."""
        return np.interp(u, np.arange(self.values.size) * self.grid_step, self.values)


@dataclass(frozen=True)
class PeriodicPotential:
    period: float
    segments: tuple[Segment, ...]
    spikes: tuple[DeltaSpike, ...] = ()
    overlay: Overlay | None = field(default=None, compare=False)

    def __post_init__(self):
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValidationError(f"period must be positive, got {self.period}")
        segments = tuple(self.segments)
        if not segments:
            raise ValidationError("a potential needs at least one segment")
        total = math.fsum(s.width for s in segments)
        if abs(total - self.period) > WIDTH_TOL * max(1.0, self.period):
            raise ValidationError(
                f"segment widths sum to {total}, expected period {self.period}")
        spikes = tuple(sorted(self.spikes, key=lambda s: s.position))
        for s in spikes:
            if not (0.0 <= s.position < self.period):
                raise ValidationError(f"spike position {s.position} outside [0, period)")
        if self.overlay is not None:
            span = self.overlay.grid_step * self.overlay.n_cells
            if abs(span - self.period) > 1e-9 * self.period:
                raise ValidationError("overlay grid must span exactly one period")
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "spikes", spikes)

    @cached_property
    def boundaries(self) -> np.ndarray:
        """Segment boundaries 0 = b0 < b1 < ... < bn = period."""
        edges = np.concatenate([[0.0], np.cumsum([s.width for s in self.segments])])
        edges[-1] = self.period
        return edges

    @cached_property
    def heights(self) -> np.ndarray:
        return np.array([s.height for s in self.segments])

    def segment_height_at(self, u):
        """Step height at local coordinate ``u`` in [0, period); right-continuous."""
        idx = np.searchsorted(self.boundaries, u, side="right") - 1
        idx = np.clip(idx, 0, len(self.segments) - 1)
        return self.heights[idx]

    def with_spike(self, position: float, strength: float) -> "PeriodicPotential":
        """Return a copy with an extra spike; spikes at the same point add up."""
        position = float(position) % self.period
        merged = list(self.spikes)
        for i, s in enumerate(merged):
            if abs(s.position - position) <= 1e-14 * self.period:
                merged[i] = DeltaSpike(s.position, s.strength + strength)
                break
        else:
            merged.append(DeltaSpike(position, strength))
        return PeriodicPotential(self.period, self.segments, tuple(merged), self.overlay)

    def spectrum_floor(self) -> float:
        """Safe lower bound for the spectrum bottom."""
        lowest = float(self.heights.min())
        if self.overlay is not None:
            lowest += float(self.overlay.values.min())
        vmax = max((abs(s.strength) for s in self.spikes), default=0.0)
        return lowest - 2.0 * vmax / self.period - 1.0

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "period": self.period,
            "segments": [{"width": s.width, "height": s.height} for s in self.segments],
            "spikes": [{"position": s.position, "strength": s.strength} for s in self.spikes],
        }
        if self.overlay is not None:
            d["overlay"] = {"grid_step": self.overlay.grid_step,
                            "values": self.overlay.values.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicPotential":
        try:
            period = float(d["period"])
            segments = tuple(Segment(float(s["width"]), float(s["height"]))
                             for s in d.get("segments") or [{"width": period, "height": 0.0}])
            spikes = tuple(DeltaSpike(float(s["position"]), float(s["strength"]))
                           for s in d.get("spikes", []))
            overlay = None
            if d.get("overlay") is not None:
                overlay = Overlay(float(d["overlay"]["grid_step"]),
                                  np.asarray(d["overlay"]["values"], dtype=float))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed potential description: {exc}") from exc
        return cls(period, segments, spikes, overlay)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "PeriodicPotential":
        return cls.from_dict(json.loads(text))


def make_kronig_penney(period: float, barrier_width: float,
                       barrier_height: float) -> PeriodicPotential:
    """Well of height 0 followed by a barrier of the given width and height."""
    if not (0 < barrier_width < period):
        raise ValidationError("need 0 < barrier_width < period")
    well = Segment(period - barrier_width, 0.0)
    barrier = Segment(barrier_width, float(barrier_height))
    return PeriodicPotential(float(period), (well, barrier))


def make_dirac_comb(period: float, strength: float) -> PeriodicPotential:
    if not period > 0:
        raise ValidationError("period must be positive")
    return PeriodicPotential(float(period), (Segment(float(period), 0.0),),
                             (DeltaSpike(0.0, float(strength)),))


def make_free(period: float) -> PeriodicPotential:
    return PeriodicPotential(float(period), (Segment(float(period), 0.0),))


def overlay_from_samples(period: float, values) -> Overlay:
    values = np.asarray(values, dtype=float)
    return Overlay(period / (values.size - 1), values)


def shift_origin(p: PeriodicPotential, eps: float) -> PeriodicPotential:
    """Describe the same periodic potential on the window [eps, eps + period].

    Steps and spikes are moved exactly. An overlay is resampled on the new
    grid, which is exact only when ``eps`` is a multiple of its grid step.
    """
    a = p.period
    if not (0.0 <= eps < a):
        raise ValidationError("need 0 <= eps < period")
    if eps == 0.0:
        return p
    b = p.boundaries
    k = int(np.searchsorted(b, eps, side="right") - 1)
    segs = []
    first_w = b[k + 1] - eps
    if first_w > WIDTH_TOL * a:
        segs.append(Segment(first_w, p.segments[k].height))
    segs.extend(p.segments[k + 1:])
    segs.extend(p.segments[:k])
    tail = eps - b[k]
    if tail > WIDTH_TOL * a:
        segs.append(Segment(tail, p.segments[k].height))
    # absorb rounding so the widths re-sum to the period
    widths = [s.width for s in segs]
    widths[-1] += a - math.fsum(widths)
    segs = [Segment(w, s.height) for w, s in zip(widths, segs)]

    spikes = []
    for s in p.spikes:
        pos = s.position - eps
        if pos < 0:
            pos += a
        if pos >= a:
            pos -= a
        spikes.append(DeltaSpike(pos, s.strength))

    overlay = None
    if p.overlay is not None:
        n = p.overlay.n_cells
        u = eps + np.arange(n + 1) * (a / n)
        vals = np.where(u <= a, p.overlay.local(np.minimum(u, a)),
                        p.overlay.local(u - a))
        # left limit at the old period boundary stays on the old side
        vals[-1] = p.overlay.local(eps)
        overlay = Overlay(a / n, vals)
    return PeriodicPotential(a, tuple(segs), tuple(spikes), overlay)


def evaluate(p: PeriodicPotential, x):
    """Potential value at ``x`` (periodic extension). Spikes are not included."""
    x = np.asarray(x, dtype=float)
    u = np.mod(x, p.period)
    v = p.segment_height_at(u)
    if p.overlay is not None:
        v = v + p.overlay.local(u)
    return v if v.ndim else float(v)


def is_mirror_symmetric(p: PeriodicPotential, tol: float = 1e-12) -> bool:
    """True if V(x) = V(period - x) on (0, period), interior spikes included."""
    w = [s.width for s in p.segments]
    h = [s.height for s in p.segments]
    if not (np.allclose(w, w[::-1], atol=tol, rtol=0) and np.allclose(h, h[::-1], atol=tol, rtol=0)):
        return False
    interior = [(s.position, s.strength) for s in p.spikes if s.position > 0]
    mirrored = sorted((p.period - x, v) for x, v in interior)
    if len(interior) != len(mirrored):
        return False
    for (x1, v1), (x2, v2) in zip(interior, mirrored):
        if abs(x1 - x2) > tol * p.period or abs(v1 - v2) > tol * max(1.0, abs(v1)):
            return False
    if p.overlay is not None:
        vals = p.overlay.values
        if not np.allclose(vals, vals[::-1], atol=tol * max(1.0, np.abs(vals).max()), rtol=0):
            return False
    return True
