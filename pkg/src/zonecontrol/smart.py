"""Floquet ("smart") solutions inside gaps, beatings inside bands, and the
auxiliary Dirichlet problem on a sliding one-period window."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import find_peaks

from .bands import BandStructure, scan_bands
from .errors import (BracketError, DefectiveMatrixError, NotInBandError, NotInGapError,
                     NumericalError, ValidationError)
from .potential import PeriodicPotential, shift_origin
from .propagator import Solution, monodromy, propagate_trace

EDGE_TOL = 1e-9
BEAT_EDGE_GUARD = 1e-4
FLAT_TOL = 1e-5  # relative envelope variation treated as no beating


@dataclass
class SmartSolution:
    energy: float
    multiplier: float
    init: tuple[float, float]
    knot_lattice: np.ndarray
    growth_exponent: float
    potential: PeriodicPotential = field(repr=False)

    @property
    def growing(self) -> bool:
        return abs(self.multiplier) > 1


@dataclass
class BeatProfile:
    energy: float
    amplitudes: np.ndarray  # log max|psi| per period
    envelope_maxima: np.ndarray
    beat_length: float
    predicted_beat_length: float


@dataclass
class AuxiliarySpectrum:
    epsilon: float
    eigenvalues: np.ndarray
    xs: np.ndarray
    eigenfunctions: np.ndarray  # shape (n_levels, len(xs)), unit L2 norm


@dataclass
class EpsilonSweep:
    level: int
    eps: np.ndarray
    energies: np.ndarray
    e_lo: float
    e_hi: float
    eps_at_lo: float
    eps_at_hi: float

    def pairs(self):
        return list(zip(self.eps.tolist(), self.energies.tolist()))

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["eps", "E"])
            for e, en in self.pairs():
                w.writerow([repr(e), repr(en)])


def _eigvec(m11, m12, m21, m22, mu):
    # (M - mu) v = 0; pick the better-conditioned row
    r1 = (m12, mu - m11)
    r2 = (mu - m22, m21)
    v = r1 if math.hypot(*r1) >= math.hypot(*r2) else r2
    n = math.hypot(*v)
    y, dy = v[0] / n, v[1] / n
    if dy < 0 or (dy == 0 and y < 0):
        y, dy = -y, -dy
    return y, dy


def smart_pair(p: PeriodicPotential, E: float,
               samples_per_period: int = 256) -> tuple[SmartSolution, SmartSolution]:
    """Growing and decaying Floquet solutions at a gap energy."""
    M = monodromy(p, E)
    delta = M.half_trace
    if abs(abs(delta) - 1.0) <= EDGE_TOL:
        raise DefectiveMatrixError(f"E={E} sits on a band edge (|Delta|=1)")
    if abs(delta) < 1.0:
        raise NotInGapError(f"E={E} is inside an allowed band (Delta={delta:.6g})")
    root = math.sqrt(delta * delta - 1.0)
    mu_big = delta + math.copysign(root, delta)
    mu_small = 1.0 / mu_big
    out = []
    for mu in (mu_big, mu_small):
        y, dy = _eigvec(M.m11, M.m12, M.m21, M.m22, mu)
        tr = propagate_trace(p, E, y, dy, 1, samples_per_period)
        knots = tr.knots[tr.knots < p.period * (1 - 1e-12)]
        out.append(SmartSolution(float(E), float(mu), (y, dy), knots,
                                 math.log(abs(mu)) / p.period, p))
    return out[0], out[1]


def knot_deviations(knots, period: float, per_period: int) -> np.ndarray:
    """|knot[i + per_period] - knot[i] - period| for consecutive periods."""
    knots = np.asarray(knots)
    if per_period <= 0 or knots.size <= per_period:
        return np.zeros(0)
    return np.abs(knots[per_period:] - knots[:-per_period] - period)


def trace_knots(s: SmartSolution, n_periods: int, samples_per_period: int = 256):
    """Knots of a smart solution, integrated in its numerically stable direction."""
    direction = 1 if s.growing else -1
    tr = propagate_trace(s.potential, s.energy, s.init[0], s.init[1], n_periods,
                         samples_per_period, direction)
    return tr.knots


def knot_period_check(s: SmartSolution, n_periods: int = 10,
                      samples_per_period: int = 256) -> float:
    """Largest departure of the knot lattice from exact period repetition."""
    if n_periods < 3:
        raise ValidationError("n_periods must be >= 3")
    knots = trace_knots(s, n_periods, samples_per_period)
    dev = knot_deviations(knots, s.potential.period, len(s.knot_lattice))
    return float(dev.max()) if dev.size else 0.0


def interlaced(a_knots, b_knots) -> bool:
    """True if merging two knot lists never puts two knots of one list in a row."""
    tagged = sorted([(x, 0) for x in a_knots] + [(x, 1) for x in b_knots])
    return all(t1[1] != t2[1] for t1, t2 in zip(tagged, tagged[1:]))


def knot_offsets_per_period(p: PeriodicPotential, E: float, init, n_periods: int,
                            samples_per_period: int = 256) -> np.ndarray:
    """Per-period maximum knot-spacing deviation for an arbitrary solution."""
    tr = propagate_trace(p, E, init[0], init[1], n_periods, samples_per_period)
    per = int(np.sum(tr.period_of(tr.knots) == n_periods - 1))
    dev = knot_deviations(tr.knots, p.period, per)
    period_idx = tr.period_of(tr.knots[:dev.size])
    out = np.zeros(n_periods - 1)
    for j in range(n_periods - 1):
        sel = dev[period_idx == j]
        out[j] = sel.max() if sel.size else np.nan
    return out


def _check_in_band(p, E):
    D = monodromy(p, np.array([E - BEAT_EDGE_GUARD, E, E + BEAT_EDGE_GUARD])).half_trace
    if abs(D[1]) > 1:
        raise NotInBandError(f"E={E} is inside a gap")
    if np.any(np.abs(D) >= 1):
        raise NotInBandError(f"E={E} is within {BEAT_EDGE_GUARD} of a band edge")
    return float(D[1])


def predicted_beat_length(p: PeriodicPotential, E: float) -> float:
    """pi / distance of the Bloch wavenumber to the nearest multiple of pi/a."""
    delta = float(monodromy(p, E).half_trace)
    K = math.acos(max(-1.0, min(1.0, delta))) / p.period
    d = min(K, math.pi / p.period - K)
    return math.inf if d <= 0 else math.pi / d


def beat_profile(p: PeriodicPotential, E: float, n_periods: int = 200,
                 samples_per_period: int = 256, init=(0.0, 1.0)) -> BeatProfile:
    """Envelope modulation of a real solution inside an allowed band."""
    _check_in_band(p, E)
    tr = propagate_trace(p, E, init[0], init[1], n_periods, samples_per_period)
    amps = tr.period_amplitudes()
    lin = np.exp(amps - amps.max())
    predicted = predicted_beat_length(p, E)
    if lin.max() - lin.min() < FLAT_TOL:
        return BeatProfile(E, amps, np.zeros(0), math.inf, predicted)
    peaks, _ = find_peaks(lin)
    pos = []
    for k in peaks:
        y0, y1, y2 = lin[k - 1], lin[k], lin[k + 1]
        den = y0 - 2 * y1 + y2
        pos.append(k + (0.5 * (y0 - y2) / den if den < 0 else 0.0))
    pos = np.array(pos)
    maxima = (pos + 0.5) * p.period
    if pos.size < 2:
        return BeatProfile(E, amps, maxima, math.inf, predicted)
    beat = float(np.mean(np.diff(pos))) * p.period
    return BeatProfile(E, amps, maxima, beat, predicted)


# -- auxiliary Dirichlet problem ------------------------------------------------


def bands_covering(p: PeriodicPotential, n_gaps: int) -> BandStructure:
    """Scan far enough up to contain the closure of gap ``n_gaps``."""
    floor = p.spectrum_floor()
    top = float(p.heights.max())
    if p.overlay is not None:
        top += float(p.overlay.values.max())
    top += sum(abs(s.strength) for s in p.spikes) * 2 / p.period
    e_max = max(top, 0.0) + ((n_gaps + 1.5) * math.pi / p.period) ** 2 + 1.0
    for _ in range(8):
        bs = scan_bands(p, floor, e_max)
        if len(bs.bands) > n_gaps and bs.bands[n_gaps][1] < e_max or len(bs.bands) > n_gaps + 1:
            return bs
        e_max = floor + 2 * (e_max - floor)
    raise BracketError(f"could not bracket gap {n_gaps}", index=n_gaps)


def _gap_bracket(bs: BandStructure, n: int):
    lo = bs.bands[n - 1][1]
    hi = bs.bands[n][0]
    w_lo = bs.bands[n - 1][1] - bs.bands[n - 1][0]
    w_hi = bs.bands[n][1] - bs.bands[n][0]
    pad = 1e-3 * min(w_lo, w_hi)
    return lo - pad, hi + pad


def dirichlet_level(p: PeriodicPotential, eps: float, n: int,
                    bands: BandStructure | None = None) -> float:
    """n-th Dirichlet eigenvalue on the window [eps, eps + period]."""
    if n < 1:
        raise ValidationError("level index starts at 1")
    if bands is None:
        bands = bands_covering(p, n)
    q = shift_origin(p, eps % p.period)
    lo, hi = _gap_bracket(bands, n)

    def end_value(e):
        return monodromy(q, e).m12

    f_lo, f_hi = end_value(lo), end_value(hi)
    if f_lo * f_hi > 0:
        raise BracketError(f"no sign change bracketing Dirichlet level {n}", index=n)
    return float(brentq(end_value, lo, hi, xtol=1e-14, rtol=1e-15))


def auxiliary_spectrum(p: PeriodicPotential, eps: float, n_levels: int,
                       n_grid: int = 1024,
                       bands: BandStructure | None = None) -> AuxiliarySpectrum:
    """Dirichlet eigenpairs of one period viewed through [eps, eps + period]."""
    a = p.period
    if not 0 <= eps < a:
        raise ValidationError("need 0 <= eps < period")
    if bands is None:
        bands = bands_covering(p, n_levels)
    q = shift_origin(p, eps)
    u = np.linspace(0.0, a, n_grid + 1)
    levels, funcs = [], []
    for n in range(1, n_levels + 1):
        e = dirichlet_level(p, eps, n, bands)
        sol = Solution(q, e, 0.0, (0.0, 1.0), 0.0, a, n_grid)
        psi, _ = sol(u)
        interior = psi[1:-1]
        nodes = int(np.sum(np.signbit(interior[1:]) != np.signbit(interior[:-1])))
        if nodes != n - 1:
            raise NumericalError(f"level {n} eigenfunction has {nodes} interior knots")
        norm = math.sqrt(np.trapezoid(psi ** 2, u))
        levels.append(e)
        funcs.append(psi / norm)
    return AuxiliarySpectrum(float(eps), np.array(levels), eps + u, np.array(funcs))


def epsilon_sweep(p: PeriodicPotential, n: int, n_samples: int = 64,
                  refine: bool = True) -> EpsilonSweep:
    """E_n on [eps, eps + a] for eps sampled over one period, plus refined extrema."""
    if n < 1:
        raise ValidationError("level index starts at 1")
    a = p.period
    bands = bands_covering(p, n)
    eps = np.arange(n_samples) * (a / n_samples)
    energies = np.array([dirichlet_level(p, e, n, bands) for e in eps])

    def level_at(e):
        return dirichlet_level(p, e % a, n, bands)

    def refine_extremum(j, sign):
        if not refine:
            return eps[j], energies[j]
        step = a / n_samples
        res = minimize_scalar(lambda e: sign * level_at(e), bounds=(eps[j] - step, eps[j] + step),
                              method="bounded", options={"xatol": 1e-10})
        best = sign * res.fun
        if sign * best > sign * energies[j]:
            return eps[j], energies[j]
        return float(res.x % a), float(best)

    eps_lo, e_lo = refine_extremum(int(np.argmin(energies)), 1.0)
    eps_hi, e_hi = refine_extremum(int(np.argmax(energies)), -1.0)
    return EpsilonSweep(n, eps, energies, e_lo, e_hi, eps_lo, eps_hi)
