import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from zonecontrol._numerics import (const_entries, illinois, linear_cell_matrices, mat_mul,
                                   ordered_product)


def as_mat(t, idx=()):
    return np.array([[t[0][idx], t[1][idx]], [t[2][idx], t[3][idx]]])


def test_ordered_product_order():
    rng = np.random.default_rng(0)
    mats = rng.normal(size=(7, 2, 2))
    tup = tuple(mats[:, i, j] for i in range(2) for j in range(2))
    got = np.array(ordered_product(tup)).reshape(2, 2)
    want = np.eye(2)
    for m in mats:
        want = m @ want
    assert np.allclose(got, want, rtol=1e-13)


@settings(max_examples=50, deadline=None)
@given(h=st.floats(-5, 5), w=st.floats(0.01, 3), E=st.floats(-5, 30))
def test_const_entries_match_expm(h, w, E):
    got = np.array(const_entries(h, w, E), dtype=float).reshape(2, 2)
    want = expm(np.array([[0.0, 1.0], [h - E, 0.0]]) * w)
    assert np.allclose(got, want, rtol=1e-10, atol=1e-10)


def test_linear_cells_against_ode():
    va, vb, h, E = 2.0, -1.0, 0.7, 3.5

    def rhs(x, y):
        q = va + (vb - va) * x / h - E
        return [y[2], y[3], q * y[0], q * y[1]]

    sol = solve_ivp(rhs, (0, h), [1, 0, 0, 1], method="DOP853", rtol=1e-13, atol=1e-14)
    want = sol.y[:, -1].reshape(2, 2)
    m = linear_cell_matrices([va], [vb], [h], [E])
    got = np.array([x[0, 0] for x in m]).reshape(2, 2)
    assert np.allclose(got, want, atol=1e-9)


def test_illinois_batched():
    roots = illinois(lambda x: x ** 3 - np.array([2.0, 5.0, 7.0]), [0.0, 0.0, 0.0], [3.0, 3.0, 3.0])
    assert np.allclose(roots, np.cbrt([2.0, 5.0, 7.0]), atol=1e-11)


def test_mat_mul_identity():
    a = (np.array(2.0), np.array(1.0), np.array(3.0), np.array(2.0))
    ident = (1.0, 0.0, 0.0, 1.0)
    assert all(np.allclose(x, y) for x, y in zip(mat_mul(a, ident), a))
