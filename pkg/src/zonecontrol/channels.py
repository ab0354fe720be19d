"""Two-channel models with symmetric coupling V12 = V21.

Model 1 decouples equal channels into scalar problems with V11 +- V12.
Model 2 picks the spectral-weight ratio that equalizes effective kinetic
energies of channels with different thresholds. Model 3 couples a channel on
[-pi, pi] to one on [-pi/2, pi/2] through a delta at x = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ._numerics import const_entries
from .bands import BandStructure, scan_bands
from .errors import AsymmetricInputError, BracketError, ValidationError
from .potential import PeriodicPotential, Segment

COUPLING_KINDS = ("constant", "delta")
_FD8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


@dataclass(frozen=True)
class TwoChannelSystem:
    eps1: float = 0.0
    eps2: float = 0.0
    v11: PeriodicPotential | None = None
    v22: PeriodicPotential | None = None
    coupling: float = 0.0
    coupling_kind: str = "constant"

    def __post_init__(self):
        if not self.eps1 <= self.eps2:
            raise ValidationError("thresholds must satisfy eps1 <= eps2")
        if self.coupling_kind not in COUPLING_KINDS:
            raise ValidationError(f"coupling_kind must be one of {COUPLING_KINDS}")
        if not math.isfinite(self.coupling):
            raise ValidationError("coupling must be finite")

    def to_dict(self) -> dict:
        d = {"eps1": self.eps1, "eps2": self.eps2, "coupling": self.coupling,
             "coupling_kind": self.coupling_kind}
        if self.v11 is not None:
            d["v11"] = self.v11.to_dict()
        if self.v22 is not None:
            d["v22"] = self.v22.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TwoChannelSystem":
        v11 = PeriodicPotential.from_dict(d["v11"]) if d.get("v11") else None
        v22 = PeriodicPotential.from_dict(d["v22"]) if d.get("v22") else None
        return cls(float(d.get("eps1", 0.0)), float(d.get("eps2", 0.0)), v11, v22,
                   float(d.get("coupling", 0.0)), d.get("coupling_kind", "constant"))


# -- model 1 -----------------------------------------------------------------------


def _add_coupling(p: PeriodicPotential, shift: float, c: float, kind: str) -> PeriodicPotential:
    if kind == "constant":
        segs = tuple(Segment(s.width, s.height + shift + c) for s in p.segments)
        return PeriodicPotential(p.period, segs, p.spikes, p.overlay)
    segs = tuple(Segment(s.width, s.height + shift) for s in p.segments)
    q = PeriodicPotential(p.period, segs, p.spikes, p.overlay)
    return q.with_spike(0.0, c) if c else q


def decouple_symmetric(sys: TwoChannelSystem) -> tuple[PeriodicPotential, PeriodicPotential]:
    """Effective scalar potentials for equal (+) and opposite (-) partial waves.

    The common threshold is folded into the step heights, so energies stay
    total energies.
    """
    if sys.v11 is None or sys.v22 is None:
        raise AsymmetricInputError("model 1 needs both diagonal potentials")
    if sys.v11.to_dict() != sys.v22.to_dict():
        raise AsymmetricInputError("model 1 needs V11 == V22")
    if sys.eps1 != sys.eps2:
        raise AsymmetricInputError("model 1 needs equal thresholds")
    plus = _add_coupling(sys.v11, sys.eps1, sys.coupling, sys.coupling_kind)
    minus = _add_coupling(sys.v11, sys.eps1, -sys.coupling, sys.coupling_kind)
    return plus, minus


def coupled_bands(sys: TwoChannelSystem, e_min: float | None = None,
                  e_max: float = 50.0) -> tuple[BandStructure, BandStructure]:
    """Band structures of both decoupled branches; their union is the spectrum."""
    plus, minus = decouple_symmetric(sys)
    if e_min is None:
        e_min = min(plus.spectrum_floor(), minus.spectrum_floor())
    return scan_bands(plus, e_min, e_max), scan_bands(minus, e_min, e_max)


# -- model 2 -----------------------------------------------------------------------


def weight_ratio(delta_eps: float, v12: float) -> tuple[float, float]:
    """Roots r = c2/c1 of r^2 - (delta_eps/v12) r - 1 = 0, delta_eps = eps2 - eps1."""
    if v12 == 0:
        raise ValidationError("weight ratio needs nonzero coupling")
    b = delta_eps / (2.0 * v12)
    root = math.hypot(b, 1.0)
    # avoid cancellation in the smaller root
    big = b + math.copysign(root, b) if b else root
    small = -1.0 / big
    return (big, small) if big > small else (small, big)


@dataclass
class EqualKnotState:
    energy: float
    ratio: float  # c2/c1, Psi2 = ratio * Psi1
    kinetic: float  # common effective kinetic energy
    length: float
    n: int

    def __call__(self, x):
        k = self.n * math.pi / self.length
        s = np.sin(k * np.asarray(x, dtype=float))
        return s, self.ratio * s


def equal_knot_state(sys: TwoChannelSystem, n: int = 1, branch: int = 0,
                     length: float = math.pi) -> EqualKnotState:
    """Model 2 state with Psi_i(0) = Psi_i(L) = 0 and proportional components."""
    if sys.coupling_kind != "constant":
        raise ValidationError("model 2 needs a constant coupling")
    r = weight_ratio(sys.eps2 - sys.eps1, sys.coupling)[branch]
    kin = (n * math.pi / length) ** 2
    E = sys.eps1 + sys.coupling * r + kin
    return EqualKnotState(E, r, kin, length, n)


def coupled_residual(sys: TwoChannelSystem, state: EqualKnotState, n_points: int = 200,
                     h: float | None = None) -> float:
    """Residual of both coupled equations, psi'' by 8th-order differences."""
    if h is None:
        h = 0.02 / max(1.0, math.sqrt(state.kinetic))
    x = np.linspace(5 * h, state.length - 5 * h, n_points)
    offs = np.arange(-4, 5) * h
    p1, p2 = state(x[:, None] + offs)
    d1 = p1 @ _FD8 / h ** 2
    d2 = p2 @ _FD8 / h ** 2
    c = sys.coupling
    E = state.energy
    r1 = -d1 + (sys.eps1 - E) * p1[:, 4] + c * p2[:, 4]
    r2 = -d2 + (sys.eps2 - E) * p2[:, 4] + c * p1[:, 4]
    return float(max(np.abs(r1).max(), np.abs(r2).max()))


# -- model 3 -----------------------------------------------------------------------

HALF_WIDTHS = (math.pi, 0.5 * math.pi)


def _edge_solution(E, eps, half):
    """Value and slope at 0 of the solution with phi(-half) = 0, phi'(-half) = 1."""
    c, s_over_k, ks, _ = const_entries(eps, half, E)
    return float(s_over_k), float(c)


def matching_matrix(sys: TwoChannelSystem, E: float) -> np.ndarray:
    """Linear conditions on (A1, B1, A2, B2) for Psi_i = A_i phi_i(x), B_i phi_i(-x)."""
    f1, g1 = _edge_solution(E, sys.eps1, HALF_WIDTHS[0])
    f2, g2 = _edge_solution(E, sys.eps2, HALF_WIDTHS[1])
    v = sys.coupling
    return np.array([
        [f1, -f1, 0.0, 0.0],
        [-g1, -g1, -v * f2, 0.0],
        [0.0, 0.0, f2, -f2],
        [-v * f1, 0.0, -g2, -g2],
    ])


def matching_det(sys: TwoChannelSystem, E: float) -> float:
    return float(np.linalg.det(matching_matrix(sys, E)))


@dataclass
class DeltaCoupledState:
    energy: float
    amplitudes: np.ndarray  # (A1, B1, A2, B2)
    kinetic: tuple[float, float]  # integral Psi'^2 / integral Psi^2 per channel
    system: TwoChannelSystem = field(repr=False)

    def channel(self, i: int, x):
        """(psi, dpsi) of channel i (1 or 2) at x; zero outside its interval."""
        eps = (self.system.eps1, self.system.eps2)[i - 1]
        half = HALF_WIDTHS[i - 1]
        A, B = self.amplitudes[2 * (i - 1):2 * i]
        x = np.asarray(x, dtype=float)
        left = x < 0
        d = np.where(left, x + half, half - x)
        inside = (d >= 0) & (np.abs(x) <= half)
        c, s_over_k, ks, _ = const_entries(eps, np.clip(d, 0.0, None), self.energy)
        amp = np.where(left, A, B)
        sgn = np.where(left, 1.0, -1.0)
        return np.where(inside, amp * s_over_k, 0.0), np.where(inside, amp * sgn * c, 0.0)


def _kinetic(state: DeltaCoupledState, i: int) -> float:
    half = HALF_WIDTHS[i - 1]
    nodes, weights = np.polynomial.legendre.leggauss(40)
    num = den = 0.0
    for a, b in ((-half, 0.0), (0.0, half)):
        x = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        y, dy = state.channel(i, x)
        num += 0.5 * (b - a) * np.sum(weights * dy * dy)
        den += 0.5 * (b - a) * np.sum(weights * y * y)
    return float(num / den) if den > 0 else math.nan


def solve_delta_coupled(sys: TwoChannelSystem, e_bracket: tuple[float, float],
                        n_scan: int = 400) -> DeltaCoupledState:
    """Lowest model-3 eigenstate with energy inside ``e_bracket``."""
    if sys.coupling_kind != "delta":
        raise ValidationError("model 3 needs a delta coupling")
    lo, hi = map(float, e_bracket)
    if not lo < hi:
        raise ValidationError("empty energy bracket")
    E = np.linspace(lo, hi, n_scan + 1)
    d = np.array([matching_det(sys, e) for e in E])
    hits = np.nonzero(d == 0)[0]
    cross = np.nonzero(d[:-1] * d[1:] < 0)[0]
    if cross.size and (not hits.size or E[cross[0]] < E[hits[0]]):
        i = cross[0]
        root = brentq(lambda e: matching_det(sys, e), E[i], E[i + 1], xtol=1e-14, rtol=1e-15)
    elif hits.size:
        root = E[hits[0]]
    else:
        raise BracketError("no model-3 eigenvalue inside the bracket")
    _, _, vt = np.linalg.svd(matching_matrix(sys, root))
    amps = vt[-1]
    if amps[np.argmax(np.abs(amps))] < 0:
        amps = -amps
    state = DeltaCoupledState(float(root), amps, (math.nan, math.nan), sys)
    state.kinetic = (_kinetic(state, 1), _kinetic(state, 2))
    return state


def decoupled_levels(sys: TwoChannelSystem) -> tuple[float, float]:
    """Ground energies of the two boxes when V12 = 0."""
    return (sys.eps1 + (math.pi / (2 * HALF_WIDTHS[0])) ** 2,
            sys.eps2 + (math.pi / (2 * HALF_WIDTHS[1])) ** 2)


def coupling_sweep(sys: TwoChannelSystem, couplings, e_bracket) -> np.ndarray:
    return np.array([solve_delta_coupled(replace(sys, coupling=float(v)), e_bracket).energy
                     for v in couplings])
