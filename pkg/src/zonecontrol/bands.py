"""Band structure from the monodromy half-trace."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._numerics import illinois, mat_mul
from .errors import ValidationError
from .potential import PeriodicPotential
from .propagator import monodromy

DEFAULT_GRID_POINTS = 4000
EDGE_XTOL = 1e-13
TOUCH_TOL = 1e-12


class NarrowBandWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Edge:
    energy: float
    kind: int  # sign of the discriminant at the edge (+1 or -1)


@dataclass
class BandStructure:
    bands: list[tuple[float, float]]
    gaps: list[tuple[float, float]]
    edges: list[Edge]
    e_min: float
    e_max: float
    period: float
    grid_step: float
    gap_kinds: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def gap(self, n: int) -> tuple[float, float]:
        """The n-th gap (1-based, counted from the spectrum bottom)."""
        if not 1 <= n <= len(self.gaps):
            raise IndexError(f"gap {n} not inside the scanned range")
        return self.gaps[n - 1]

    def band(self, n: int) -> tuple[float, float]:
        if not 1 <= n <= len(self.bands):
            raise IndexError(f"band {n} not inside the scanned range")
        return self.bands[n - 1]

    def table(self) -> list[dict]:
        rows = [{"lo": lo, "hi": hi, "kind": "band"} for lo, hi in self.bands]
        rows += [{"lo": lo, "hi": hi, "kind": "gap"} for lo, hi in self.gaps]
        return sorted(rows, key=lambda r: (r["lo"], r["hi"]))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.table(), **kwargs)


@dataclass
class ForbiddennessProfile:
    energies: np.ndarray
    imK: np.ndarray


def discriminant(p: PeriodicPotential, E):
    """Half-trace of the monodromy matrix."""
    return monodromy(p, E).half_trace


def _disc_array(p, E):
    return np.asarray(monodromy(p, np.atleast_1d(E)).half_trace, dtype=float)


def scan_bands(p: PeriodicPotential, e_min: float | None = None, e_max: float = 50.0,
               grid_step: float | None = None) -> BandStructure:
    """Locate allowed and forbidden zones on [e_min, e_max].

    Edges are bracketed on a uniform grid and refined as roots of
    Delta(E) = +-1. Tangential touchings and sub-grid gaps or bands are found
    by refining local extrema of Delta that approach +-1.
    """
    if e_min is None:
        e_min = p.spectrum_floor()
    if not e_min < e_max:
        raise ValidationError("scan range is empty: need e_min < e_max")
    if grid_step is None:
        grid_step = (e_max - e_min) / (DEFAULT_GRID_POINTS - 1)
    if grid_step <= 0:
        raise ValidationError("grid_step must be positive")
    n = max(3, int(math.ceil((e_max - e_min) / grid_step)) + 1)
    E = np.linspace(e_min, e_max, n)
    D = _disc_array(p, E)
    label = np.where(D > 1, 1, np.where(D < -1, -1, 0))

    lo_b, hi_b, target = [], [], []
    zero_width = []
    notes = []

    def scalar_disc(e):
        return float(monodromy(p, e).half_trace)

    for i in range(n - 1):
        a, b = label[i], label[i + 1]
        if a == b:
            continue
        if a != 0 and b != 0:
            # a whole band fits between two grid points
            lo_b += [E[i], E[i]]
            hi_b += [E[i + 1], E[i + 1]]
            target += [1.0, -1.0]
            notes.append(f"band narrower than grid step near E={E[i]:.6g}")
        else:
            s = a if a != 0 else b
            lo_b.append(E[i])
            hi_b.append(E[i + 1])
            target.append(float(s))

    for i in range(1, n - 1):
        d0, d1, d2 = D[i - 1], D[i], D[i + 1]
        is_max = d1 >= d0 and d1 >= d2
        is_min = d1 <= d0 and d1 <= d2
        if not (is_max or is_min):
            continue
        lab = label[i - 1:i + 2]
        if is_max and (lab == 0).all():
            s = 1.0
        elif is_min and (lab == 0).all():
            s = -1.0
        elif is_min and (lab == 1).all():
            s = 1.0
        elif is_max and (lab == -1).all():
            s = -1.0
        else:
            continue
        # extremum of Delta on [E[i-1], E[i+1]]: root of a symmetric difference
        e_star = _extremum(scalar_disc, E[i - 1], E[i + 1], is_max)
        d_star = scalar_disc(e_star)
        crossed = (d_star - s) * (d1 - s) < 0
        if (lab == 0).all():
            if crossed:
                lo_b += [E[i - 1], e_star]
                hi_b += [e_star, E[i + 1]]
                target += [s, s]
                notes.append(f"gap narrower than grid step near E={e_star:.6g}")
            elif abs(d_star - s) <= TOUCH_TOL:
                zero_width.append(Edge(e_star, int(s)))
        elif crossed:
            lo_b += [E[i - 1], e_star]
            hi_b += [e_star, E[i + 1]]
            target += [s, s]
            notes.append(f"band narrower than grid step near E={e_star:.6g}")

    edges = list(zero_width) * 2
    if lo_b:
        tgt = np.array(target)
        roots = illinois(lambda x: _disc_array(p, x) - tgt, lo_b, hi_b, xtol=EDGE_XTOL)
        edges += [Edge(float(r), int(s)) for r, s in zip(roots, tgt)]
    edges.sort(key=lambda e: e.energy)

    bands, gaps, gap_kinds = [], [], []
    in_band = label[0] == 0
    start = e_min
    started_below = not in_band
    for edge in edges:
        if in_band:
            bands.append((start, edge.energy))
        elif not (started_below and not bands):
            gaps.append((start, edge.energy))
            gap_kinds.append(edge.kind)
        start = edge.energy
        in_band = not in_band
    if in_band:
        bands.append((start, e_max))
    elif bands:
        gaps.append((start, e_max))
        gap_kinds.append(int(label[-1]))

    for lo, hi in bands:
        if hi - lo < 2 * grid_step and hi < e_max:
            warnings.warn(f"band [{lo:.6g}, {hi:.6g}] is narrower than two grid steps; "
                          "a finer grid may reveal more structure", NarrowBandWarning)
    return BandStructure(bands, gaps, edges, float(e_min), float(e_max), p.period,
                         float(grid_step), gap_kinds, notes)


def _extremum(f, lo, hi, is_max):
    h = 1e-5 * max(1.0, hi - lo)

    def slope(e):
        return f(e + h) - f(e - h)

    s_lo, s_hi = slope(lo), slope(hi)
    if s_lo * s_hi < 0:
        return float(brentq(slope, lo, hi, xtol=1e-14, rtol=1e-15))
    sign = -1.0 if is_max else 1.0
    res = minimize_scalar(lambda e: sign * f(e), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x)


def forbiddenness(p: PeriodicPotential, grid) -> ForbiddennessProfile:
    """Im K(E) = acosh(|Delta|)/a in gaps, 0 in bands."""
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ValidationError("energy grid must be sorted")
    D = np.abs(_disc_array(p, grid)).reshape(grid.shape)
    imk = np.where(D > 1, np.arccosh(np.maximum(D, 1.0)), 0.0) / p.period
    return ForbiddennessProfile(grid, imk)


def im_k(p: PeriodicPotential, E: float) -> float:
    d = abs(float(discriminant(p, E)))
    return math.acosh(d) / p.period if d > 1 else 0.0


def transmission(p: PeriodicPotential, E, n_periods: int):
    """|t|^2 through ``n_periods`` copies of the period embedded in V = 0."""
    if n_periods < 0:
        raise ValidationError("n_periods must be >= 0")
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    if np.any(E_arr <= 0):
        raise ValidationError("transmission needs E > 0")
    if n_periods == 0:
        T = np.ones_like(E_arr)
    else:
        M = monodromy(p, E_arr)
        a11, a12, a21, a22 = (np.asarray(x) for x in M.entries)
        r = (np.ones_like(E_arr), np.zeros_like(E_arr), np.zeros_like(E_arr), np.ones_like(E_arr))
        base = (a11, a12, a21, a22)
        k = n_periods
        while k:
            if k & 1:
                r = mat_mul(base, r)
            base = mat_mul(base, base)
            k >>= 1
        m11, m12, m21, m22 = r
        kk = np.sqrt(E_arr)
        T = 4.0 / ((m11 + m22) ** 2 + (kk * m12 - m21 / kk) ** 2)
    return float(T[0]) if np.ndim(E) == 0 else T


def write_discriminant_csv(p: PeriodicPotential, grid, path, header_lines=()):
    grid = np.asarray(grid, dtype=float)
    D = _disc_array(p, grid)
    imk = np.where(np.abs(D) > 1, np.arccosh(np.maximum(np.abs(D), 1.0)), 0.0) / p.period
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["E", "discriminant", "imK", "in_band"])
        for e, d, k in zip(grid, D, imk):
            w.writerow([repr(float(e)), repr(float(d)), repr(float(k)), int(abs(d) <= 1)])
