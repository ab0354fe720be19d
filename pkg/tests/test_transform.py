import math
import warnings

import numpy as np
import pytest

from zonecontrol import transform as T
from zonecontrol.bands import im_k, scan_bands
from zonecontrol.errors import SingularTransformError, ValidationError
from zonecontrol.potential import (PeriodicPotential, Segment, make_dirac_comb, make_free,
                                   make_kronig_penney)
from zonecontrol.propagator import monodromy

SQUARES = np.array([1.0, 4.0, 9.0, 16.0, 25.0, 36.0])


@pytest.fixture(scope="module")
def shifted():
    return T.susy_shift(make_free(math.pi), 1, -5.0, probe_energies=(2.0,))


def test_dirichlet_levels_free_and_comb(free, comb):
    assert np.allclose(T.dirichlet_levels(free, 6), SQUARES, atol=1e-12)
    # spike at the wall does not touch Dirichlet states
    assert np.allclose(T.dirichlet_levels(comb, 6), SQUARES, atol=1e-12)


def test_callable_dirichlet_matches_exact(kp):
    exact = T.dirichlet_levels(kp, 5)
    solver = T.CallableDirichlet(lambda x: np.where(x < 1.5, 0.0, 3.0), kp.period, (), [1.5])
    assert np.allclose(solver.levels(5), exact, atol=1e-9)


def test_susy_isospectral_minus_one(shifted):
    levels = shifted.dirichlet_levels(6)
    assert np.allclose(levels, [-4, 4, 9, 16, 25, 36], atol=1e-7)
    assert np.allclose(shifted.state_energies, [-4, 4, 9, 16, 25, 36])


def test_susy_residuals_and_orthonormality(shifted):
    for n in range(1, 7):
        assert shifted.residual(n) < 1e-6
    assert np.allclose(shifted.overlap_matrix(), np.eye(6), atol=1e-6)


def test_susy_probe_state_solves_equation(shifted):
    # transformed non-eigen solution: check -psi'' + V psi = E psi on samples
    xs = shifted.xs
    psi = shifted.probe_states[2.0]
    h = xs[1] - xs[0]
    d2 = (psi[2:] - 2 * psi[1:-1] + psi[:-2]) / h ** 2
    res = -d2 + (shifted.potential(xs[1:-1]) - 2.0) * psi[1:-1]
    assert np.max(np.abs(res)) < 1e-3 * np.max(np.abs(psi))


def test_susy_zero_shift_is_identity(free):
    r = T.susy_shift(free, 2, 0.0)
    assert np.max(np.abs(r.delta_v)) == 0.0


def test_susy_ends_continuous(shifted):
    v = shifted.potential(np.array([0.0, math.pi]))
    assert v[0] == pytest.approx(10.0, abs=1e-9)  # -2t at both walls
    assert v[1] == pytest.approx(10.0, abs=1e-9)


def test_theta_constant_at_zero_shift(free):
    b = T._as_base(free)
    E, psi0 = b.eigen(1)
    psib, _ = T._auxiliary(b, 1, E)
    theta = T.wronskian_theta(psi0, psib, np.linspace(0, math.pi, 50))
    assert np.ptp(theta) < 1e-12


def test_singular_shift_raises(free):
    with pytest.raises(SingularTransformError):
        T.susy_shift(free, 2, -3.5)  # E_2 + t crosses E_1
    with pytest.raises(ValidationError):
        T.susy_shift(free, 1, 3.0)  # lands on E_2


def test_usable_shift_interval(free):
    lo, hi = T.usable_shift_interval(free, 2)
    assert lo == pytest.approx(-3.0, abs=1e-6)
    assert hi == pytest.approx(5.0, abs=1e-6)


def test_asymmetric_base_flagged(kp):
    r = T.susy_shift(kp, 1, 0.3, n_states=3)
    assert r.diagnostics["auxiliary_start"].startswith("left-edge")
    assert np.allclose(r.dirichlet_levels(3), T.dirichlet_levels(kp, 3) + [0.3, 0, 0], atol=1e-7)


def test_swf_isospectral_and_localizes(free):
    masses = []
    for r in (2.0, 5.0, 10.0, 20.0):
        res = T.swf_transform(free, 1, r)
        assert np.allclose(res.dirichlet_levels(6), SQUARES, atol=1e-7)
        assert np.allclose(res.overlap_matrix(), np.eye(6), atol=1e-6)
        assert max(res.residual(n) for n in range(1, 7)) < 1e-6
        psi = res.state(1)
        masses.append(T.inner(lambda x: psi(x)[0] * (x < math.pi / 2), lambda x: psi(x)[0],
                              math.pi, [math.pi / 2]))
        assert masses[-1] == pytest.approx(r * r / (1 + r * r), abs=1e-9)
    assert all(a < b for a, b in zip(masses, masses[1:]))


def test_swf_identity_and_composition(free):
    assert np.max(np.abs(T.swf_transform(free, 2, 1.0).delta_v)) == 0.0
    fwd = T.swf_transform(free, 1, 5.0)
    back = T.swf_transform(fwd, 1, 0.2)
    x = np.linspace(0, math.pi, 501)
    assert np.max(np.abs(back.potential(x))) < 1e-6


def test_swf_rejects_bad_ratio(free):
    for r in (0.0, -1.0, math.inf):
        with pytest.raises(ValidationError):
            T.swf_transform(free, 1, r)


def test_swf_c_rescaled(free):
    res = T.swf_transform(free, 1, 3.0)
    assert res.diagnostics["c_new"] == pytest.approx(3 * math.sqrt(2 / math.pi), rel=1e-10)
    assert res.state(1)(np.array([0.0]))[1][0] == pytest.approx(res.diagnostics["c_new"], rel=1e-9)


def test_identity_periodization_reproduces_comb(free, comb):
    res = T.swf_transform(free, 1, 1.0)
    bs = T.periodize_and_rescan(res, 4.0, None, 20)
    ref = scan_bands(comb, bs.e_min, 20)
    assert np.allclose([e.energy for e in bs.edges], [e.energy for e in ref.edges], atol=1e-9)


def test_swf_tears_spectrum_at_level(free):
    # the level-1 state keeps knots at the walls; its multiplier becomes c_old/c_new squared
    r = 2.0
    q = T.periodized(T.swf_transform(free, 1, r), 4.0)
    assert im_k(q, 1.0) == pytest.approx(math.log(r * r) / math.pi, rel=1e-4)
    for n in (2, 3, 4):
        assert abs(abs(float(monodromy(q, n * n).half_trace)) - 1) < 1e-5


def test_discontinuity_warning():
    base = make_kronig_penney(math.pi, 1.0, 2.0)
    res = T.susy_shift(base, 1, 0.3, n_states=2)
    with pytest.warns(T.DiscontinuityWarning):
        T.periodized(res)


def test_delta_edge_selectivity(comb):
    well = T.delta_edge_shift(comb, "mid-well", 0.5, e_max=12)
    assert well.position == pytest.approx(math.pi / 2)
    lo_before, lo_after, lo_shift = well.shifts[1]
    hi_before, hi_after, hi_shift = well.shifts[2]
    assert abs(hi_shift) < 1e-8 and lo_shift > 0.1
    barrier = T.delta_edge_shift(comb, "mid-barrier", 0.5, e_max=12)
    assert abs(barrier.shifts[1][2]) < 1e-8 and barrier.shifts[2][2] > 1e-3


def test_delta_edge_zero_strength(kp):
    es = T.delta_edge_shift(kp, "mid-barrier", 0.0, e_max=20)
    assert all(abs(d) < 1e-12 for _, _, d in es.shifts)
    assert es.position == pytest.approx(1.75)


def test_result_json(shifted):
    p = PeriodicPotential.from_json(shifted.to_json())
    assert np.allclose(p.overlay.values, shifted.new_potential.overlay.values)
    assert '"usable_shift"' not in shifted.diagnostics_json()


@pytest.fixture(scope="module")
def gap_window(comb):
    from scipy.optimize import brentq
    from zonecontrol.potential import shift_origin
    from zonecontrol.smart import dirichlet_level
    eps = brentq(lambda e: dirichlet_level(comb, e, 1) - 2.0, 0.0, 1.5, xtol=1e-14)
    return shift_origin(comb, eps)


def test_swf_signed_exponent_monotone(gap_window, comb):
    # the multiplier of the level-1 Floquet solution scales as 1/r^2, so the
    # signed exponent ln|f|/a falls monotonically while Im K = its modulus
    mu = float(monodromy(gap_window, 2.0).m22)  # psi'(a)/psi'(0) of the Dirichlet state
    signed = []
    for r in np.geomspace(1 / 8, 8, 9):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", T.DiscontinuityWarning)
            q = T.periodized(T.swf_transform(gap_window, 1, r, n_states=1))
        d = abs(float(monodromy(q, 2.0).half_trace))
        closed = abs(math.log(abs(mu)) - 2 * math.log(r)) / math.pi
        assert im_k(q, 2.0) == pytest.approx(closed, abs=1e-5)  # O(h^2) overlay error
        assert d >= 1.0 - 1e-12
        signed.append(math.log(abs(mu)) / math.pi - 2 * math.log(r) / math.pi)
    assert np.all(np.diff(signed) < 0)


def test_interior_jump_moved_to_steps(gap_window):
    # psi' jumps at the comb spike, so Delta V does; the overlay must stay continuous
    res = T.swf_transform(gap_window, 1, 4.0, n_states=1)
    q = res.new_potential
    s = q.spikes[0].position if q.spikes[0].position > 0 else q.spikes[-1].position
    assert len(q.segments) == 2 and q.segments[0].width == pytest.approx(s, abs=1e-12)
    jump = q.segments[1].height - q.segments[0].height
    exact = res.potential(np.array([s + 1e-10])) - res.potential(np.array([s - 1e-10]))
    assert jump == pytest.approx(float(exact[0]), rel=1e-6)
    assert np.max(np.abs(np.diff(q.overlay.values))) < 0.05 * abs(jump) + 0.1


def test_merging_scan_wide_range(free, capsys):
    shifts = np.linspace(-2.0, 3.0, 21)
    scan = T.zone_merging_scan(free, 2, shifts, extra_comb=4.0)
    assert np.allclose(scan.moved_edge, 4.0 + shifts)
    assert any(lo <= 1.0 and hi >= 1.0 for lo, hi in scan.events)
    with capsys.disabled():
        print(f"\nmerging events for shifts in [-2, 3]: {scan.events}")
