"""Transfer of (psi, psi') across x-intervals at fixed energy.

Constant steps use the closed-form sin/cos (sinh/cosh) matrices, spikes use
the jump psi'(x+) = psi'(x-) + v psi(x), and overlay cells (linear in x) use
an adaptive Dormand-Prince 5(4) step. States recorded at a point are left
limits: a spike sitting at x acts just after x.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import _numerics as nm
from .errors import DerivativeTooSmallError, ValidationError
from .potential import PeriodicPotential

RTOL = 1e-10
RENORM_LIMIT = 1e100
_ENERGY_CHUNK = 64


@dataclass(frozen=True)
class TransferMatrix:
    """Real 2x2 map of (psi, psi') column vectors; entries may be arrays."""

    m11: float
    m12: float
    m21: float
    m22: float

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        return TransferMatrix(*nm.mat_mul(self.entries, other.entries))

    @property
    def entries(self):
        return (self.m11, self.m12, self.m21, self.m22)

    @property
    def det(self):
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self):
        return self.m11 + self.m22

    @property
    def half_trace(self):
        return 0.5 * (self.m11 + self.m22)

    def apply(self, psi, dpsi):
        return (self.m11 * psi + self.m12 * dpsi, self.m21 * psi + self.m22 * dpsi)

    def inverse(self) -> "TransferMatrix":
        # det == 1
        return TransferMatrix(self.m22, -self.m12, -self.m21, self.m11)

    def as_array(self) -> np.ndarray:
        return np.moveaxis(np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=float),
                           (0, 1), (-2, -1))

    def __getitem__(self, idx) -> "TransferMatrix":
        return TransferMatrix(*(np.asarray(m)[idx] for m in self.entries))


def segment_matrix(height, width, E) -> TransferMatrix:
    if np.any(np.asarray(width) <= 0):
        raise ValidationError("segment width must be positive")
    m = nm.const_entries(height, width, E)
    if m[0].ndim == 0:
        return TransferMatrix(*(float(x) for x in m))
    return TransferMatrix(*m)


def spike_matrix(strength) -> TransferMatrix:
    return TransferMatrix(1.0, 0.0, strength, 1.0)


# -- layouts -----------------------------------------------------------------

CONST, LINEAR = 0, 1


@dataclass
class Layout:
    """Ordered decomposition of [x0, x1] into elementary intervals.

    Interval i spans [xl[i], xr[i]]; ``spike[i]`` is the total spike strength
    applied at its left end before crossing it. ``va``/``vb`` are the
    potential values at the interval ends (equal for constant intervals).
    """

    xl: np.ndarray
    xr: np.ndarray
    kind: np.ndarray
    va: np.ndarray
    vb: np.ndarray
    spike: np.ndarray

    def __len__(self):
        return self.xl.size

    def matrices(self, E, rtol=RTOL):
        """Interval matrices (without spikes), entries shaped (n, B)."""
        E = np.atleast_1d(np.asarray(E, dtype=float))
        n = len(self)
        out = [np.empty((n, E.size)) for _ in range(4)]
        w = self.xr - self.xl
        const = self.kind == CONST
        if const.any():
            m = nm.constant_cell_matrices(self.va[const], w[const], E)
            for o, x in zip(out, m):
                o[const] = x
        lin = ~const
        if lin.any():
            m = nm.linear_cell_matrices(self.va[lin], self.vb[lin], w[lin], E, rtol)
            for o, x in zip(out, m):
                o[lin] = x
        return out

    def product(self, E, rtol=RTOL):
        """Total matrix over the layout including spikes, entries shaped (B,)."""
        E = np.atleast_1d(np.asarray(E, dtype=float))
        pieces = []
        for start in range(0, E.size, _ENERGY_CHUNK):
            chunk = E[start:start + _ENERGY_CHUNK]
            m11, m12, m21, m22 = self.matrices(chunk, rtol)
            # fold spike jumps into the interval matrices: M_i @ S_i
            s = self.spike[:, None]
            m11 = m11 + m12 * s
            m21 = m21 + m22 * s
            pieces.append(nm.ordered_product((m11, m12, m21, m22)))
        return tuple(np.concatenate([p[i] for p in pieces]) for i in range(4))

    def partial(self, i, x, E, rtol=RTOL):
        """Matrices from xl[i] to points ``x`` inside interval(s) ``i``."""
        i = np.atleast_1d(i)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = x - self.xl[i]
        E = np.atleast_1d(E)
        out = [np.empty((x.size, E.size)) for _ in range(4)]
        const = self.kind[i] == CONST
        zero = w <= 0
        if (const & ~zero).any():
            sel = const & ~zero
            m = nm.constant_cell_matrices(self.va[i][sel], w[sel], E)
            for o, v in zip(out, m):
                o[sel] = v
        lin = ~const & ~zero
        if lin.any():
            ii = i[lin]
            frac = w[lin] / (self.xr[ii] - self.xl[ii])
            vbp = self.va[ii] + (self.vb[ii] - self.va[ii]) * frac
            m = nm.linear_cell_matrices(self.va[ii], vbp, w[lin], E, rtol)
            for o, v in zip(out, m):
                o[lin] = v
        if zero.any():
            out[0][zero], out[1][zero], out[2][zero], out[3][zero] = 1.0, 0.0, 0.0, 1.0
        return out


def build_layout(p: PeriodicPotential, x0: float, x1: float, extra=None) -> Layout:
    """Decompose [x0, x1] of the periodic extension into elementary intervals."""
    if not x1 > x0:
        raise ValidationError("layout needs x1 > x0")
    a = p.period
    tol = 1e-13 * max(1.0, a, abs(x0), abs(x1))
    m_lo = math.floor(x0 / a)
    m_hi = math.floor(x1 / a)
    local = [p.boundaries]
    if p.overlay is not None:
        local.append(np.arange(p.overlay.n_cells + 1) * p.overlay.grid_step)
    spike_pos = np.array([s.position for s in p.spikes])
    spike_val = np.array([s.strength for s in p.spikes])
    local.append(spike_pos)
    base = np.unique(np.concatenate(local))
    pts = [np.array([x0, x1])]
    spikes_x, spikes_v = [], []
    for m in range(m_lo, m_hi + 1):
        pts.append(m * a + base)
        spikes_x.append(m * a + spike_pos)
        spikes_v.append(spike_val)
    if extra is not None:
        pts.append(np.asarray(extra, dtype=float))
    pts = np.sort(np.concatenate(pts))
    pts = pts[(pts >= x0 - tol) & (pts <= x1 + tol)]
    pts = np.clip(pts, x0, x1)
    keep = np.concatenate([[True], np.diff(pts) > tol])
    pts = pts[keep]
    pts[-1] = x1
    if pts.size < 2 or pts[-2] >= x1:
        pts = np.array([x0, x1])
    xl, xr = pts[:-1], pts[1:]
    mid = 0.5 * (xl + xr)
    m_idx = np.floor(mid / a)
    ul = xl - m_idx * a
    ur = xr - m_idx * a
    h = p.segment_height_at(mid - m_idx * a)
    if p.overlay is not None:
        va = h + p.overlay.local(np.clip(ul, 0.0, a))
        vb = h + p.overlay.local(np.clip(ur, 0.0, a))
        kind = np.full(xl.size, LINEAR)
    else:
        va = vb = h.astype(float)
        kind = np.full(xl.size, CONST)
    spike = np.zeros(xl.size)
    if spikes_x:
        sx = np.concatenate(spikes_x)
        sv = np.concatenate(spikes_v)
        inside = (sx >= x0 - tol) & (sx < x1 - tol)
        idx = np.searchsorted(xl, sx[inside] - tol, side="left")
        np.add.at(spike, idx, sv[inside])
    return Layout(xl, xr, kind, np.asarray(va, float), np.asarray(vb, float), spike)


def _period_layout(p: PeriodicPotential) -> Layout:
    cache = p.__dict__.setdefault("_layout_cache", {})
    if "period" not in cache:
        cache["period"] = build_layout(p, 0.0, p.period)
    return cache["period"]


def transfer(p: PeriodicPotential, x0: float, x1: float, E) -> TransferMatrix:
    """Transfer matrix from x0 to x1 (spikes in [x0, x1) included)."""
    lay = build_layout(p, x0, x1)
    m = lay.product(E)
    if np.ndim(E) == 0:
        return TransferMatrix(*(float(v[0]) for v in m))
    return TransferMatrix(*m)


def monodromy(p: PeriodicPotential, E) -> TransferMatrix:
    """One-period propagator M(E) over [0, period)."""
    m = _period_layout(p).product(E)
    if np.ndim(E) == 0:
        return TransferMatrix(*(float(v[0]) for v in m))
    return TransferMatrix(*(np.reshape(v, np.shape(E)) for v in m))


# -- traces ------------------------------------------------------------------


@dataclass
class WaveTrace:
    xs: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    log_scale: np.ndarray
    energy: float
    period: float
    n_periods: int
    direction: int
    knots: np.ndarray
    double_knots: np.ndarray = field(default_factory=lambda: np.empty(0))
    boundary_index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))

    def period_of(self, x):
        return np.floor(np.asarray(x) / self.period + 1e-12).astype(int)

    def to_csv(self, path, header_lines=()):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["x", "psi", "dpsi", "log_scale"])
            for row in zip(self.xs, self.psi, self.dpsi, self.log_scale):
                w.writerow([repr(float(v)) for v in row])

    def period_amplitudes(self):
        """Log of max |psi| on each period, with parabolic peak refinement."""
        out = []
        for j in range(self.n_periods):
            lo, hi = self.boundary_index[j], self.boundary_index[j + 1]
            y = np.abs(self.psi[lo:hi + 1])
            k = int(np.argmax(y))
            peak = y[k]
            if 0 < k < y.size - 1:
                x = self.xs[lo:hi + 1]
                h1, h2 = x[k] - x[k - 1], x[k + 1] - x[k]
                if abs(h1 - h2) < 1e-9 * (h1 + h2):
                    y0, y1, y2 = y[k - 1], y[k], y[k + 1]
                    den = y0 - 2 * y1 + y2
                    if den < 0:
                        peak = y1 - 0.125 * (y2 - y0) ** 2 / den
            out.append(math.log(peak) + self.log_scale[lo])
        return np.array(out)


def propagate_trace(p: PeriodicPotential, E: float, psi0: float, dpsi0: float,
                    n_periods: int, samples_per_period: int = 256,
                    direction: int = 1) -> WaveTrace:
    """Sample a solution over ``n_periods`` periods starting from x = 0.

    ``direction=-1`` integrates leftward over [-n*period, 0], which is the
    stable direction for solutions decaying to the right.
    """
    if psi0 == 0 and dpsi0 == 0:
        raise ValidationError("initial state must be nonzero")
    if n_periods < 1:
        raise ValidationError("n_periods must be >= 1")
    a = p.period
    E = float(E)
    samples = np.arange(samples_per_period + 1) * (a / samples_per_period)
    lay = build_layout(p, 0.0, a, extra=samples)
    m11, m12, m21, m22 = (v[:, 0].tolist() for v in lay.matrices(E))
    spikes = lay.spike.tolist()
    xl = lay.xl
    n_int = len(lay)

    xs_all, psi_all, dpsi_all, ls_all, post_all, knots, doubles = [], [], [], [], [], [], []
    bidx = []
    y, dy = float(psi0), float(dpsi0)
    log_scale = 0.0

    if direction >= 0:
        for j in range(n_periods):
            bidx.append(len(xs_all))
            off = j * a
            for i in range(n_int):
                xs_all.append(off + xl[i])
                psi_all.append(y)
                dpsi_all.append(dy)
                ls_all.append(log_scale)
                dy = dy + spikes[i] * y
                post_all.append((y, dy))
                y, dy = m11[i] * y + m12[i] * dy, m21[i] * y + m22[i] * dy
            big = max(abs(y), abs(dy), max(abs(v) for v in psi_all[bidx[-1]:]))
            if big > RENORM_LIMIT:
                y, dy = y / big, dy / big
                log_scale += math.log(big)
        bidx.append(len(xs_all))
        xs_all.append(n_periods * a)
        psi_all.append(y)
        dpsi_all.append(dy)
        ls_all.append(log_scale)
        post_all.append((y, dy))
        offsets_layout = [j * a for j in range(n_periods)]
    else:
        # walk leftward; collect per period then reverse
        per = []
        for j in range(n_periods):
            off = -(j + 1) * a
            block = []
            for i in reversed(range(n_int)):
                # y, dy is the state at xr[i]; invert interval then spike
                yl = m22[i] * y - m12[i] * dy
                dyl = -m21[i] * y + m11[i] * dy
                post = (yl, dyl)
                dyl = dyl - spikes[i] * yl
                block.append((off + xl[i], yl, dyl, post))
                y, dy = yl, dyl
            big = max(abs(y), abs(dy), max(abs(b[1]) for b in block))
            per.append((block, log_scale))
            if big > RENORM_LIMIT:
                y, dy = y / big, dy / big
                log_scale += math.log(big)
        for block, ls in reversed(per):
            bidx.append(len(xs_all))
            for xv, yv, dyv, post in reversed(block):
                xs_all.append(xv)
                psi_all.append(yv)
                dpsi_all.append(dyv)
                ls_all.append(ls)
                post_all.append(post)
        bidx.append(len(xs_all))
        xs_all.append(0.0)
        psi_all.append(float(psi0))
        dpsi_all.append(float(dpsi0))
        ls_all.append(0.0)
        post_all.append((float(psi0), float(dpsi0)))
        offsets_layout = [-(j + 1) * a for j in reversed(range(n_periods))]

    xs = np.array(xs_all)
    psi = np.array(psi_all)
    dpsi = np.array(dpsi_all)
    ls = np.array(ls_all)
    bidx = np.array(bidx)

    # knots: sign changes within each interval, refined by bracketing
    for jp, off in enumerate(offsets_layout):
        base = bidx[jp]
        seg = psi[base:base + n_int + 1]
        scale = np.max(np.abs(seg))
        for i in range(n_int):
            ya, yb = seg[i], seg[i + 1]
            if ya == 0.0:
                knots.append(xs[base + i])
                continue
            if ya * yb < 0:
                y0, dy0 = post_all[base + i]

                def f(x, i=i, y0=y0, dy0=dy0):
                    mm = lay.partial(i, x - off, E)
                    return mm[0][0, 0] * y0 + mm[1][0, 0] * dy0

                knots.append(brentq(f, xs[base + i], xs[base + i + 1], xtol=1e-13, rtol=1e-15))
            elif 0 < i < n_int and abs(ya) < 1e-9 * scale and abs(ya) <= abs(seg[i - 1]) \
                    and abs(ya) <= abs(yb):
                doubles.append(xs[base + i])
    if psi[-1] == 0.0:
        knots.append(xs[-1])
    return WaveTrace(xs, psi, dpsi, ls, E, a, n_periods, 1 if direction >= 0 else -1,
                     np.array(sorted(knots)), np.array(doubles), bidx)


def junction_factor(trace: WaveTrace, period_index: int) -> float:
    """Ratio psi'(right end) / psi'(left end) over one period of a trace."""
    if not 0 <= period_index < trace.n_periods:
        raise ValidationError("period_index outside trace")
    lo = trace.boundary_index[period_index]
    hi = trace.boundary_index[period_index + 1]
    d0 = trace.dpsi[lo]
    d1 = trace.dpsi[hi]
    scale = np.max(np.abs(trace.dpsi[lo:hi + 1]))
    if abs(d0) < 1e-12 * scale or abs(d1) < 1e-12 * scale:
        raise DerivativeTooSmallError("derivative vanishes at a period boundary")
    return float(d1 / d0 * math.exp(trace.log_scale[hi] - trace.log_scale[lo]))


# -- evaluable solutions ---------------------------------------------------------


class Solution:
    """A fixed-energy solution on [x_lo, x_hi], evaluable at arbitrary points.

    Node states come from exact/adaptive propagation from ``x0``; values
    between nodes are obtained by propagating from the preceding node.
    """

    def __init__(self, p: PeriodicPotential, E: float, x0: float, state0,
                 x_lo: float, x_hi: float, n_grid: int = 2048):
        self.potential = p
        self.energy = float(E)
        self.x_lo, self.x_hi = float(x_lo), float(x_hi)
        grid = np.linspace(x_lo, x_hi, n_grid + 1)
        self.layout = lay = build_layout(p, x_lo, x_hi, extra=np.append(grid, x0))
        m11, m12, m21, m22 = (v[:, 0] for v in lay.matrices(self.energy))
        n = len(lay)
        post = np.empty((n, 2))
        i0 = int(np.searchsorted(lay.xl, x0 - 1e-13 * max(1.0, abs(x0)), side="left"))
        y, dy = float(state0[0]), float(state0[1])
        # forward from x0
        for i in range(i0, n):
            dy = dy + lay.spike[i] * y
            post[i] = y, dy
            y, dy = m11[i] * y + m12[i] * dy, m21[i] * y + m22[i] * dy
        self._end_state = (y, dy)
        y, dy = float(state0[0]), float(state0[1])
        for i in reversed(range(i0)):
            yl = m22[i] * y - m12[i] * dy
            dyl = -m21[i] * y + m11[i] * dy
            post[i] = yl, dyl
            y, dy = yl, dyl - lay.spike[i] * yl
        self._post = post

    def __call__(self, x):
        """Return (psi, dpsi) at ``x`` (right limits at spike positions)."""
        x = np.asarray(x, dtype=float)
        flat = np.clip(x.ravel(), self.x_lo, self.x_hi)
        lay = self.layout
        i = np.clip(np.searchsorted(lay.xl, flat, side="right") - 1, 0, len(lay) - 1)
        mm = lay.partial(i, flat, self.energy)
        y0, dy0 = self._post[i, 0], self._post[i, 1]
        psi = mm[0][:, 0] * y0 + mm[1][:, 0] * dy0
        dpsi = mm[2][:, 0] * y0 + mm[3][:, 0] * dy0
        return psi.reshape(x.shape), dpsi.reshape(x.shape)

    def scaled(self, factor: float) -> "Solution":
        new = object.__new__(Solution)
        new.__dict__.update(self.__dict__)
        new._post = self._post * factor
        new._end_state = tuple(v * factor for v in self._end_state)
        return new
