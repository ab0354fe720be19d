import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from zonecontrol.errors import DerivativeTooSmallError, ValidationError
from zonecontrol.potential import (PeriodicPotential, Segment, make_dirac_comb, make_free,
                                   overlay_from_samples)
from zonecontrol.propagator import (Solution, junction_factor, monodromy, propagate_trace,
                                    segment_matrix, spike_matrix, transfer)

from conftest import comb_disc


def test_comb_monodromy_closed_form(comb):
    for E in (0.3, 1.7, 2.0, 5.5, 12.25, 30.0):
        assert float(monodromy(comb, E).half_trace) == pytest.approx(comb_disc(E), abs=1e-13)


@settings(max_examples=40, deadline=None)
@given(E=st.floats(-3, 40))
def test_determinant_is_one(E):
    p = make_dirac_comb(math.pi, 4.0).with_spike(1.0, -2.0)
    assert float(monodromy(p, E).det) == pytest.approx(1.0, abs=1e-9)


def test_segment_matrix_against_ode():
    M = segment_matrix(2.0, 0.8, 1.3)
    sol = solve_ivp(lambda x, y: [y[1], (2.0 - 1.3) * y[0]], (0, 0.8), [1, 0], rtol=1e-12, atol=1e-14)
    assert M.m11 == pytest.approx(sol.y[0, -1], abs=1e-10)
    assert M.m21 == pytest.approx(sol.y[1, -1], abs=1e-10)


def test_segment_width_validated():
    with pytest.raises(ValidationError):
        segment_matrix(0.0, 0.0, 1.0)


def test_spike_matrix():
    M = spike_matrix(3.0)
    assert (M.m11, M.m12, M.m21, M.m22) == (1.0, 0.0, 3.0, 1.0)


def test_transfer_composes(kp):
    E = 4.2
    whole = transfer(kp, 0.0, 2.0, E)
    parts = transfer(kp, 0.9, 2.0, E) @ transfer(kp, 0.0, 0.9, E)
    assert np.allclose(whole.as_array(), parts.as_array(), atol=1e-12)


def test_overlay_constant_equals_segment():
    a = 2.0
    ov = overlay_from_samples(a, np.full(65, 1.5))
    p = PeriodicPotential(a, (Segment(a, 0.0),), (), ov)
    q = PeriodicPotential(a, (Segment(a, 1.5),))
    for E in (0.5, 3.0, 10.0):
        assert float(monodromy(p, E).half_trace) == pytest.approx(float(monodromy(q, E).half_trace), abs=1e-8)


def test_overlay_linear_ramp_against_ode():
    a = 1.0
    x = np.linspace(0, a, 9)
    ov = overlay_from_samples(a, 4 * x)
    p = PeriodicPotential(a, (Segment(a, 0.0),), (), ov)
    E = 2.5
    sol = solve_ivp(lambda t, y: [y[1], (4 * t - E) * y[0]], (0, a), [0, 1], method="DOP853",
                    rtol=1e-13, atol=1e-14)
    assert float(monodromy(p, E).m12) == pytest.approx(sol.y[0, -1], abs=1e-9)


def test_free_trace_knots_and_junction(free):
    tr = propagate_trace(free, 1.0, 0.0, 1.0, 3)
    assert np.allclose(tr.knots, [0.0, math.pi, 2 * math.pi], atol=1e-12)
    assert junction_factor(tr, 1) == pytest.approx(-1.0, abs=1e-12)


def test_junction_factor_small_derivative(free):
    tr = propagate_trace(free, 1.0, 1.0, 0.0, 2)
    with pytest.raises(DerivativeTooSmallError):
        junction_factor(tr, 0)


def test_trace_renormalizes(comb):
    tr = propagate_trace(comb, 2.0, 1.0, 0.0, 400, 32)
    assert np.all(np.isfinite(tr.psi))
    assert tr.log_scale[-1] > 100


def test_leftward_trace_matches_inverse(comb):
    E = 2.0
    tr = propagate_trace(comb, E, 0.3, -0.7, 2, direction=-1)
    M = monodromy(comb, E)
    y, dy = M.inverse().apply(0.3, -0.7)
    i = tr.boundary_index[1]
    assert tr.psi[i] == pytest.approx(y, abs=1e-12)


def test_solution_evaluates_both_sides(comb):
    E = 3.3
    sol = Solution(comb, E, 1.0, (0.4, 0.2), -math.pi, 2 * math.pi)
    y, dy = sol(np.array([1.0, 2.5, -1.0]))
    assert y[0] == pytest.approx(0.4, abs=1e-13)
    M = transfer(comb, 1.0, 2.5, E)
    assert y[1] == pytest.approx(M.apply(0.4, 0.2)[0], abs=1e-12)
    M = transfer(comb, -1.0, 1.0, E).inverse()
    assert y[2] == pytest.approx(M.apply(0.4, 0.2)[0], abs=1e-12)


def test_zero_state_rejected(comb):
    with pytest.raises(ValidationError):
        propagate_trace(comb, 2.0, 0.0, 0.0, 2)
