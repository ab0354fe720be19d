"""Inverse-problem control of one-period potentials.

Two exact transformations act on the Dirichlet problem on [0, L]:

* a SUSY level shift, which moves a single eigenvalue E_n -> E_n + t;
* a spectral-weight-factor (SWF) change, which rescales the boundary
  derivative c_m of one eigenfunction by r and keeps every eigenvalue.

The result is continued periodically (optionally with a Dirac comb at the
period boundaries) and rescanned with :mod:`zonecontrol.bands`. Transformed
potentials are kept as exact callables built from propagated base solutions;
the sampled overlay is only used for band scans.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._numerics import illinois, mat_mul, ordered_product
from .bands import BandStructure, scan_bands
from .errors import BracketError, SingularTransformError, ValidationError
from .potential import (DeltaSpike, PeriodicPotential, Segment, evaluate,
                        is_mirror_symmetric, overlay_from_samples)
from .propagator import Solution, monodromy

DEFAULT_GRID = 2048
THETA_TOL = 1e-10
COLLISION_TOL = 1e-6
QUAD_PANELS = 512
RK_STEPS = 8192

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_FD8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


class DiscontinuityWarning(UserWarning):
    pass


# -- quadrature --------------------------------------------------------------


def _gl(f, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = mid[..., None] + half[..., None] * _GL_X
    return (f(x) * _GL_W).sum(axis=-1) * half


class _Cumulative:
    """x -> integral of f over [0, x], Gauss-Legendre on fixed panels."""

    def __init__(self, f, nodes):
        self.f = f
        self.nodes = nodes
        self.cum = np.concatenate([[0.0], np.cumsum(_gl(f, nodes[:-1], nodes[1:]))])

    @property
    def total(self) -> float:
        return float(self.cum[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        i = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1, 0, len(self.nodes) - 2)
        out = self.cum[i] + _gl(self.f, self.nodes[i], flat)
        return out.reshape(x.shape)


def _panels(L, breakpoints, n=QUAD_PANELS):
    nodes = np.union1d(np.linspace(0.0, L, n + 1), breakpoints)
    keep = np.concatenate([[True], np.diff(nodes) > 1e-13 * L])
    return nodes[keep]


def inner(f, g, L, breakpoints=()) -> float:
    """Integral of f*g over [0, L] for callables returning arrays."""
    nodes = _panels(L, np.asarray(breakpoints, dtype=float))
    return float(_gl(lambda x: f(x) * g(x), nodes[:-1], nodes[1:]).sum())


# -- Dirichlet spectra ------------------------------------------------------------


def _fd_guesses(v_fn, L, spikes, n_levels, n=2000):
    h = L / n
    x = np.arange(1, n) * h
    diag = 2.0 / h ** 2 + np.asarray(v_fn(x), dtype=float)
    for s in spikes:
        j = int(round(s.position / h)) - 1
        if 0 <= j < n - 1:
            diag[j] += s.strength / h
    off = np.full(n - 2, -1.0 / h ** 2)
    return eigh_tridiagonal(diag, off, select="i", select_range=(0, n_levels),
                            eigvals_only=True)


def _refine_levels(m12, guesses, n_levels):
    g = np.asarray(guesses, dtype=float)
    lo = np.empty(n_levels)
    hi = np.empty(n_levels)
    for k in range(n_levels):
        below = g[k] - (g[k + 1] - g[k]) if k == 0 else 0.5 * (g[k - 1] + g[k])
        lo[k] = below
        hi[k] = 0.5 * (g[k] + g[k + 1])
    flo, fhi = m12(lo), m12(hi)
    bad = np.nonzero(flo * fhi > 0)[0]
    if bad.size:
        raise BracketError(f"could not bracket Dirichlet level {bad[0] + 1}", index=int(bad[0]) + 1)
    return illinois(m12, lo, hi, flo, fhi, xtol=1e-14)


def _interior_spikes(spikes, L):
    return tuple(s for s in spikes if 0.0 < s.position < L)


def dirichlet_levels(p: PeriodicPotential, n_levels: int) -> np.ndarray:
    """First Dirichlet eigenvalues of one period [0, a] of ``p``."""
    if n_levels < 1:
        raise ValidationError("n_levels must be >= 1")
    guesses = _fd_guesses(lambda x: evaluate(p, x), p.period,
                          _interior_spikes(p.spikes, p.period), n_levels)

    def m12(E):
        return np.asarray(monodromy(p, np.asarray(E, dtype=float)).m12)

    return _refine_levels(m12, guesses, n_levels)


class CallableDirichlet:
    """Dirichlet problem for a potential given as a callable on [0, L].

    Each smooth panel between breakpoints is covered by fixed RK4 steps whose
    transfer matrices are multiplied as a balanced product; spikes act at
    panel junctions.
    """

    def __init__(self, v_fn, L, spikes=(), breakpoints=(), n_steps=RK_STEPS):
        self.v_fn = v_fn
        self.L = float(L)
        self.spikes = _interior_spikes(spikes, L)
        cuts = np.union1d([0.0, L], [s.position for s in self.spikes])
        cuts = np.union1d(cuts, [b for b in breakpoints if 0 < b < L])
        keep = np.concatenate([[True], np.diff(cuts) > 1e-13 * L])
        cuts = cuts[keep]
        spike_at = {s.position: s.strength for s in self.spikes}
        self.panels = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(16, int(math.ceil(n_steps * (b - a) / L)))
            h = (b - a) / n
            x = a + h * np.arange(n)
            nudge = 1e-12 * (b - a)
            v0 = np.asarray(v_fn(np.maximum(x, a + nudge)), dtype=float)
            vm = np.asarray(v_fn(x + 0.5 * h), dtype=float)
            v1 = np.asarray(v_fn(np.minimum(x + h, b - nudge)), dtype=float)
            self.panels.append((h, v0, vm, v1, spike_at.get(b, 0.0)))

    def transfer(self, E):
        E = np.atleast_1d(np.asarray(E, dtype=float))
        total = (np.ones_like(E), np.zeros_like(E), np.zeros_like(E), np.ones_like(E))
        for h, v0, vm, v1, spike in self.panels:
            q0 = v0[:, None] - E
            qm = vm[:, None] - E
            q1 = v1[:, None] - E
            one = np.ones_like(q0)
            zero = np.zeros_like(q0)
            ident = (one, zero, zero, one)

            def plus(s, k):
                return tuple(i + s * kk for i, kk in zip(ident, k))

            k1 = (zero, one, q0, zero)
            am = (zero, one, qm, zero)
            k2 = mat_mul(am, plus(0.5 * h, k1))
            k3 = mat_mul(am, plus(0.5 * h, k2))
            k4 = mat_mul((zero, one, q1, zero), plus(h, k3))
            step = tuple(i + (h / 6) * (a + 2 * b + 2 * c + d)
                         for i, a, b, c, d in zip(ident, k1, k2, k3, k4))
            total = mat_mul(ordered_product(step), total)
            if spike:
                total = mat_mul((1.0, 0.0, spike, 1.0), total)
        return total

    def m12(self, E):
        return self.transfer(E)[1]

    def levels(self, n_levels: int) -> np.ndarray:
        guesses = _fd_guesses(self.v_fn, self.L, self.spikes, n_levels)
        return _refine_levels(self.m12, guesses, n_levels)


# -- base problems ------------------------------------------------------------------


StateFn = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


@dataclass
class _Base:
    L: float
    segments: tuple[Segment, ...]
    spikes: tuple[DeltaSpike, ...]
    overlay_fn: Callable | None
    breakpoints: np.ndarray
    potential: PeriodicPotential | None = None
    states: list = field(default_factory=list)  # (E, fn) from a TransformResult
    symmetric: bool = False

    def v(self, x):
        x = np.asarray(x, dtype=float)
        b = np.array([0.0] + [s.width for s in self.segments]).cumsum()
        b[-1] = self.L
        idx = np.clip(np.searchsorted(b, x, side="right") - 1, 0, len(self.segments) - 1)
        out = np.array([s.height for s in self.segments])[idx]
        if self.overlay_fn is not None:
            out = out + self.overlay_fn(x)
        return out

    def levels(self, n: int) -> np.ndarray:
        if self.potential is not None:
            return dirichlet_levels(self.potential, n)
        return CallableDirichlet(self.v, self.L, self.spikes, self.breakpoints).levels(n)

    def eigen(self, n: int, level: float | None = None):
        """Unit-norm Dirichlet eigenfunction n with psi'(0) > 0."""
        if self.potential is None:
            if n > len(self.states):
                raise ValidationError(f"transformed base only carries {len(self.states)} states")
            E, fn = self.states[n - 1]
        else:
            E = self.levels(n)[-1] if level is None else level
            fn = self.solution(E, 0.0, (0.0, 1.0))
        norm = math.sqrt(inner(lambda x: fn(x)[0], lambda x: fn(x)[0], self.L, self.breakpoints))
        sign = 1.0 if fn(np.array([0.0]))[1][0] >= 0 else -1.0
        return float(E), _scaled(fn, sign / norm)

    def solution(self, E, x0, state) -> StateFn:
        if self.potential is None:
            raise ValidationError("SUSY shifts need a step/spike/overlay base potential")
        return Solution(self.potential, E, x0, state, 0.0, self.L)


def _scaled(fn, c):
    def g(x):
        y, dy = fn(x)
        return c * y, c * dy
    return g


def _as_base(base) -> _Base:
    if isinstance(base, TransformResult):
        return _Base(base.period, base.segments, base.spikes, base.overlay_fn,
                     base.breakpoints, None,
                     list(zip(base.state_energies.tolist(), base.state_fns)))
    if isinstance(base, PeriodicPotential):
        bp = np.union1d(base.boundaries, [s.position for s in base.spikes])
        overlay_fn = None
        if base.overlay is not None:
            bp = np.union1d(bp, np.arange(base.overlay.n_cells + 1) * base.overlay.grid_step)
            overlay_fn = base.overlay.local
        return _Base(base.period, base.segments, base.spikes, overlay_fn, bp, base,
                     symmetric=is_mirror_symmetric(base))
    raise ValidationError("base must be a PeriodicPotential or a TransformResult")


# -- results ------------------------------------------------------------------------


@dataclass
class TransformResult:
    kind: str
    level: int
    parameter: float
    period: float
    new_potential: PeriodicPotential
    xs: np.ndarray
    delta_v: np.ndarray
    state_energies: np.ndarray
    transformed_states: np.ndarray  # rows: sampled eigenfunctions 1..n_states
    probe_states: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    segments: tuple = ()
    spikes: tuple = ()
    breakpoints: np.ndarray = field(default=None, repr=False)
    overlay_fn: Callable | None = field(default=None, repr=False)
    state_fns: list = field(default_factory=list, repr=False)

    def potential(self, x):
        """Exact transformed potential on [0, L] (spikes excluded)."""
        return _Base(self.period, self.segments, self.spikes, self.overlay_fn,
                     self.breakpoints).v(x)

    def dirichlet_levels(self, n_levels: int, n_steps: int = RK_STEPS) -> np.ndarray:
        solver = CallableDirichlet(self.potential, self.period, self.spikes,
                                   self.breakpoints, n_steps)
        return solver.levels(n_levels)

    def state(self, n: int) -> StateFn:
        return self.state_fns[n - 1]

    def residual(self, n: int, n_points: int = 400) -> float:
        """max |-psi'' + (V - E) psi| / ||psi|| by 8th-order finite differences."""
        fn = self.state_fns[n - 1]
        E = self.state_energies[n - 1]
        L = self.period
        h = 3e-4 * L
        x = np.linspace(6 * h, L - 6 * h, n_points)
        bp = np.asarray(self.breakpoints)
        interior = bp[(bp > 0) & (bp < L)]
        if interior.size:
            x = x[np.min(np.abs(x[:, None] - interior[None, :]), axis=1) > 5 * h]
        offsets = np.arange(-4, 5) * h
        psi = fn(x[:, None] + offsets)[0]
        d2 = psi @ _FD8 / h ** 2
        res = -d2 + (self.potential(x) - E) * psi[:, 4]
        norm = math.sqrt(inner(lambda y: fn(y)[0], lambda y: fn(y)[0], L, bp))
        return float(np.max(np.abs(res)) / norm)

    def overlap_matrix(self) -> np.ndarray:
        n = len(self.state_fns)
        out = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                out[i, j] = out[j, i] = inner(lambda x: self.state_fns[i](x)[0],
                                              lambda x: self.state_fns[j](x)[0],
                                              self.period, self.breakpoints)
        return out

    def to_json(self, **kwargs) -> str:
        return self.new_potential.to_json(**kwargs)

    def diagnostics_json(self, **kwargs) -> str:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        d = {"kind": self.kind, "level": self.level, "parameter": self.parameter}
        d.update({k: clean(v) for k, v in self.diagnostics.items()})
        return json.dumps(d, **kwargs)


def _add_steps(segments, jumps, L):
    """Split step segments at jump positions and raise everything to the right."""
    cuts = np.cumsum([0.0] + [sg.width for sg in segments])
    cuts[-1] = L
    xs = np.union1d(cuts, [x for x, _ in jumps])
    out = []
    for a, c in zip(xs[:-1], xs[1:]):
        if c - a <= 0:
            continue
        mid = 0.5 * (a + c)
        h = segments[min(int(np.searchsorted(cuts, mid, side="right")) - 1, len(segments) - 1)].height
        h += sum(j for x, j in jumps if x < mid)
        out.append(Segment(float(c - a), float(h)))
    widths = [sg.width for sg in out]
    out[-1] = Segment(float(L - sum(widths[:-1])), out[-1].height)
    return tuple(out)


def _sample_overlay(b: _Base, delta_fn, grid):
    """Tabulate base overlay plus delta_fn on the uniform grid.

    The transformed potential jumps where psi' does, at interior spikes. A
    linear overlay would smear such a jump over a cell, so it is moved into
    the step segments and the overlay keeps only the continuous remainder.
    """
    xs = np.linspace(0.0, b.L, grid + 1)
    dv = np.asarray(delta_fn(xs), dtype=float)

    def total(x):
        x = np.asarray(x, dtype=float)
        base = b.overlay_fn(x) if b.overlay_fn is not None else 0.0
        return base + np.asarray(delta_fn(x), dtype=float)

    jumps = []
    for sp in b.spikes:
        if 0.0 < sp.position < b.L:
            nudge = 1e-12 * b.L
            lo, hi = total(np.array([sp.position - nudge, sp.position + nudge]))
            if lo != hi:
                jumps.append((sp.position, float(hi - lo)))
    values = total(xs)
    for x, j in jumps:
        values = values - j * (xs > x)
    segments = _add_steps(b.segments, jumps, b.L) if jumps else b.segments
    pot = PeriodicPotential(b.L, segments, b.spikes, overlay_from_samples(b.L, values))
    return xs, dv, pot


def _combine_overlay(b: _Base, delta_fn):
    if b.overlay_fn is None:
        return delta_fn
    base_fn = b.overlay_fn
    return lambda x: base_fn(x) + delta_fn(x)


# -- SUSY level shift ---------------------------------------------------------------


def _auxiliary(b: _Base, level: int, energy: float):
    """Auxiliary solution at the shifted energy, parity opposite to psi_0."""
    if b.symmetric:
        # psi_0 of level n is even about L/2 for odd n
        state = (0.0, 1.0) if level % 2 == 1 else (1.0, 0.0)
        mode = "midpoint-odd" if level % 2 == 1 else "midpoint-even"
        return b.solution(energy, 0.5 * b.L, state), mode
    return b.solution(energy, 0.0, (1.0, 0.0)), "left-edge (asymmetric base)"


def _theta_check(theta, scale):
    if np.any(np.sign(theta) != np.sign(theta[0])) or np.min(np.abs(theta)) < THETA_TOL * scale:
        raise SingularTransformError("Wronskian theta vanishes on the interval; shift not usable")


def wronskian_theta(psi0: StateFn, psib: StateFn, xs) -> np.ndarray:
    """theta = psi0' psib - psi0 psib' sampled at ``xs``; raises if it vanishes."""
    y0, d0 = psi0(xs)
    yb, db = psib(xs)
    theta = d0 * yb - y0 * db
    scale = float(np.max(np.abs(d0 * yb) + np.abs(y0 * db)))
    _theta_check(theta, scale)
    return theta


def _susy_parts(b: _Base, level: int, shift: float, En: float | None = None):
    En, psi0 = b.eigen(level, En)
    psib, mode = _auxiliary(b, level, En + shift)
    check = np.union1d(np.linspace(0.0, b.L, 8 * DEFAULT_GRID + 1), b.breakpoints)
    theta = wronskian_theta(psi0, psib, check)
    return En, psi0, psib, mode, check, theta


def susy_shift(base: PeriodicPotential, level: int, shift: float, grid: int = DEFAULT_GRID,
               n_states: int = 6, probe_energies=(),
               find_usable_range: bool = False) -> TransformResult:
    """Move the Dirichlet level ``level`` of one period by ``shift``."""
    if level < 1:
        raise ValidationError("level index starts at 1")
    if not math.isfinite(shift):
        raise ValidationError("shift must be finite")
    b = _as_base(base)
    n_states = max(n_states, level)
    levels = b.levels(n_states + 1)
    En = float(levels[level - 1])
    target = En + shift
    others = np.delete(levels, level - 1)
    if np.any(np.abs(others - target) < COLLISION_TOL):
        raise ValidationError("shifted level collides with another Dirichlet eigenvalue")
    En, psi0, psib, mode, check, theta_s = _susy_parts(b, level, shift, En)
    t = float(shift)

    def parts(x):
        y0, d0 = psi0(x)
        yb, db = psib(x)
        return y0, d0, yb, db, d0 * yb - y0 * db

    def delta_v(x):
        y0, d0, yb, db, th = parts(x)
        return -2.0 * t * ((d0 * yb + y0 * db) / th - t * (y0 * yb) ** 2 / th ** 2)

    nodes = _panels(b.L, b.breakpoints)
    fns, energies, norms = [], [], []
    for m in range(1, n_states + 1):
        if m == level:
            def target_fn(x):
                y0, d0, yb, db, th = parts(x)
                return y0 / th, d0 / th - t * y0 * y0 * yb / th ** 2
            fn, e = target_fn, target
        else:
            Em, psim = b.eigen(m, float(levels[m - 1]))
            cum = _Cumulative(lambda x, f=psim: psi0(x)[0] * f(x)[0], nodes)

            def fn(x, psim=psim, cum=cum):
                y0, d0, yb, db, th = parts(x)
                ym, dm = psim(x)
                I = cum(x)
                dth = t * y0 * yb
                ratio = yb / th
                dratio = (db * th - yb * dth) / th ** 2
                return ym - t * ratio * I, dm - t * (dratio * I + ratio * y0 * ym)
            e = Em
        nrm = math.sqrt(inner(lambda x, f=fn: f(x)[0], lambda x, f=fn: f(x)[0], b.L, b.breakpoints))
        norms.append(nrm)
        fns.append(_scaled(fn, 1.0 / nrm))
        energies.append(e)

    xs, dv, pot = _sample_overlay(b, delta_v, grid)
    states = np.array([f(xs)[0] for f in fns])
    probes = {}
    for E in probe_energies:
        psiE = b.solution(E, 0.0, (0.0, 1.0))
        cumE = _Cumulative(lambda x, f=psiE: psi0(x)[0] * f(x)[0], nodes)
        y0, d0, yb, db, th = parts(xs)
        probes[float(E)] = psiE(xs)[0] - t * yb / th * cumE(xs)

    diag = {
        "theta_x": check,
        "theta": theta_s,
        "theta_min_abs": float(np.min(np.abs(theta_s))),
        "auxiliary_start": mode,
        "base_levels": levels[:n_states],
        "unnormalized_norms": np.array(norms),
    }
    if find_usable_range:
        diag["usable_shift"] = usable_shift_interval(base, level)
    return TransformResult("susy", level, t, b.L, pot, xs, dv, np.array(energies), states, probes,
                           diag, b.segments, b.spikes, b.breakpoints,
                           _combine_overlay(b, delta_v), fns)


def usable_shift_interval(base: PeriodicPotential, level: int, iters: int = 40):
    """(t_lo, t_hi): shifts for which theta stays nonvanishing, by bisection."""
    b = _as_base(base)
    levels = b.levels(level + 1)
    En = float(levels[level - 1])

    def ok(t):
        try:
            _susy_parts(b, level, t, En)
        except SingularTransformError:
            return False
        return True

    def bisect(good, bad):
        for _ in range(iters):
            mid = 0.5 * (good + bad)
            if ok(mid):
                good = mid
            else:
                bad = mid
        return good

    t_hi = bisect(0.0, float(levels[level] - En))
    if level == 1:
        probe = -100.0 * float(levels[1] - levels[0])
        t_lo = -math.inf if ok(probe) else bisect(0.0, probe)
    else:
        t_lo = bisect(0.0, float(levels[level - 2] - En))
    return float(t_lo), float(t_hi)


# -- spectral weight factor -------------------------------------------------------------


def swf_transform(base, level: int, ratio: float, grid: int = DEFAULT_GRID,
                  n_states: int = 6) -> TransformResult:
    """Rescale the boundary derivative c_m of eigenfunction ``level`` by ``ratio``."""
    if level < 1:
        raise ValidationError("level index starts at 1")
    r = float(ratio)
    if not (math.isfinite(r) and r > 0):
        raise ValidationError("weight ratio must be finite and positive")
    b = _as_base(base)
    n_states = max(n_states, level)
    if b.potential is not None:
        levels = b.levels(n_states)
    else:
        levels = np.array([e for e, _ in b.states[:n_states]])
        if len(levels) < n_states:
            raise ValidationError(f"transformed base only carries {len(levels)} states")
    Em, psim = b.eigen(level, float(levels[level - 1]))
    g = 1.0 - r * r
    nodes = _panels(b.L, b.breakpoints)
    P = _Cumulative(lambda x: psim(x)[0] ** 2, nodes)
    xs_check = np.union1d(np.linspace(0.0, b.L, 8 * DEFAULT_GRID + 1), b.breakpoints)
    denom = 1.0 - g * P(xs_check)
    if np.any(denom <= 0):
        raise SingularTransformError("SWF denominator vanishes; ratio not usable")

    def delta_v(x):
        y, dy = psim(x)
        D = 1.0 - g * P(x)
        return 4.0 * g * y * dy / D + 2.0 * g * g * y ** 4 / D ** 2

    fns = []
    for n in range(1, n_states + 1):
        if n == level:
            def fn(x):
                y, dy = psim(x)
                D = 1.0 - g * P(x)
                return r * y / D, r * (dy / D + g * y ** 3 / D ** 2)
        else:
            _, psin = b.eigen(n, float(levels[n - 1]))
            J = _Cumulative(lambda x, f=psin: psim(x)[0] * f(x)[0], nodes)

            def fn(x, psin=psin, J=J):
                y, dy = psim(x)
                yn, dn = psin(x)
                D = 1.0 - g * P(x)
                j = J(x)
                val = yn + g * y * j / D
                der = dn + g * ((dy * j + y * y * yn) / D + g * y ** 3 * j / D ** 2)
                return val, der
        fns.append(fn)

    xs, dv, pot = _sample_overlay(b, delta_v, grid)
    states = np.array([f(xs)[0] for f in fns])
    c_old = float(psim(np.array([0.0]))[1][0])
    diag = {
        "denominator_x": xs_check,
        "denominator": denom,
        "c_old": c_old,
        "c_new": r * c_old,
        "mass_total": P.total,
    }
    return TransformResult("swf", level, r, b.L, pot, xs, dv, np.asarray(levels[:n_states]),
                           states, {}, diag, b.segments, b.spikes, b.breakpoints,
                           _combine_overlay(b, delta_v), fns)


# -- periodic continuation ---------------------------------------------------------------


def periodized(result: TransformResult, extra_comb: float | None = None,
               jump_tol: float = 1e-6) -> PeriodicPotential:
    """The transformed period as a PeriodicPotential, optionally with a comb spike at 0."""
    L = result.period
    v = result.potential(np.array([0.0, L]))
    jump = abs(v[0] - v[1])
    if jump > jump_tol:
        warnings.warn(f"periodic continuation has a jump of {jump:.3g} at the period boundary",
                      DiscontinuityWarning)
    p = result.new_potential
    if extra_comb:
        p = p.with_spike(0.0, float(extra_comb))
    return p


def periodize_and_rescan(result: TransformResult, extra_comb: float | None = None,
                         e_min: float | None = None, e_max: float = 50.0,
                         grid_step: float | None = None) -> BandStructure:
    return scan_bands(periodized(result, extra_comb), e_min, e_max, grid_step)


# -- delta-peak edge shifting -------------------------------------------------------------


@dataclass
class EdgeShift:
    position: float
    strength: float
    reference: BandStructure
    bands: BandStructure
    shifts: list[tuple[float, float, float]]  # (before, after, after - before)

    def moved(self, tol: float = 1e-8) -> list[bool]:
        return [abs(d) > tol for _, _, d in self.shifts]


def placement_position(p: PeriodicPotential, placement) -> float:
    """Midpoint of the main barrier or well of a period."""
    if not isinstance(placement, str):
        return float(placement) % p.period
    if placement not in ("mid-barrier", "mid-well"):
        raise ValidationError("placement must be 'mid-barrier', 'mid-well' or a position")
    h = p.heights
    if np.ptp(h) > 0:
        k = int(np.argmax(h) if placement == "mid-barrier" else np.argmin(h))
        return float(0.5 * (p.boundaries[k] + p.boundaries[k + 1]))
    if not p.spikes:
        raise ValidationError("potential has no identifiable barriers or wells")
    s = max(p.spikes, key=lambda s: abs(s.strength))
    on_spike = (s.strength > 0) == (placement == "mid-barrier")
    return s.position if on_spike else (s.position + 0.5 * p.period) % p.period


def delta_edge_shift(p: PeriodicPotential, placement, strength: float,
                     e_min: float | None = None, e_max: float = 50.0) -> EdgeShift:
    """Add a spike at a barrier or well midpoint and compare band edges."""
    pos = placement_position(p, placement)
    if e_min is None:
        e_min = p.spectrum_floor() - 2.0 * abs(strength) / p.period
    ref = scan_bands(p, e_min, e_max)
    new = scan_bands(p.with_spike(pos, strength), e_min, e_max)
    before = [e.energy for e in ref.edges]
    after = [e.energy for e in new.edges]
    n = min(len(before), len(after))
    shifts = [(before[i], after[i], after[i] - before[i]) for i in range(n)]
    return EdgeShift(pos, float(strength), ref, new, shifts)


# -- zone merging ---------------------------------------------------------------------------


@dataclass
class MergingScan:
    shifts: np.ndarray
    moved_edge: np.ndarray
    partner_edge: np.ndarray  # nearest other edge of the same kind
    events: list[tuple[float, float]]  # shift intervals where the two edges cross

    @property
    def signed_gap(self) -> np.ndarray:
        return self.partner_edge - self.moved_edge


def zone_merging_scan(base: PeriodicPotential, level: int, shifts, extra_comb: float | None = None,
                      window: tuple[float, float] | None = None,
                      n_energies: int = 600) -> MergingScan:
    """Follow the shifted edge and its gap partner; report crossings (zone merging)."""
    from .bands import _disc_array
    shifts = np.asarray(shifts, dtype=float)
    En = float(dirichlet_levels(base, level)[-1])
    if window is None:
        window = (En + shifts.min() - 1.5, En + shifts.max() + 2.5)
    E = np.linspace(window[0], window[1], n_energies)
    moved, partner = [], []
    for t in shifts:
        res = susy_shift(base, level, t, n_states=level)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DiscontinuityWarning)
            q = periodized(res, extra_comb)
        target = En + t
        kind = 1.0 if float(monodromy(q, target).half_trace) > 0 else -1.0
        D = _disc_array(q, E) - kind
        idx = np.nonzero(np.sign(D[:-1]) != np.sign(D[1:]))[0]
        roots = []
        for i in idx:
            roots.append(float(illinois(lambda x: _disc_array(q, x) - kind,
                                        [E[i]], [E[i + 1]], xtol=1e-12)[0]))
        roots = np.array(roots)
        if roots.size:
            roots = np.delete(roots, np.argmin(np.abs(roots - target)))
        moved.append(target)
        partner.append(roots[np.argmin(np.abs(roots - target))] if roots.size else np.nan)
    moved = np.array(moved)
    partner = np.array(partner)
    gap = partner - moved
    events = [(float(shifts[i]), float(shifts[i + 1])) for i in range(len(shifts) - 1)
              if np.isfinite(gap[i]) and np.isfinite(gap[i + 1]) and gap[i] * gap[i + 1] < 0]
    return MergingScan(shifts, moved, partner, events)
