"""Low-level kernels: 2x2 matrix batches, the Dormand-Prince 5(4) step for
psi'' = (V - E) psi with V linear on a cell, and a batched Illinois root
refiner.

Matrices are carried as tuples ``(m11, m12, m21, m22)`` of broadcastable
arrays, which is considerably faster than ``np.matmul`` on stacks of 2x2.
"""

from __future__ import annotations

import numpy as np

from .errors import IntegrationError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

MAX_DEPTH = 40


def mat_mul(a, b):
    """Product a @ b for tuples of 2x2 entries."""
    a11, a12, a21, a22 = a
    b11, b12, b21, b22 = b
    return (a11 * b11 + a12 * b21, a11 * b12 + a12 * b22,
            a21 * b11 + a22 * b21, a21 * b12 + a22 * b22)


def ordered_product(mats):
    """Product M[n-1] @ ... @ M[0] along axis 0 via pairwise reduction."""
    m = [np.asarray(x) for x in mats]
    while m[0].shape[0] > 1:
        n = m[0].shape[0]
        if n % 2:
            ident = _identity_like(m)
            m = [np.concatenate([x, i]) for x, i in zip(m, ident)]
        lo = [x[0::2] for x in m]
        hi = [x[1::2] for x in m]
        m = list(mat_mul(hi, lo))
    return tuple(x[0] for x in m)


def _identity_like(m):
    shape = (1,) + m[0].shape[1:]
    one = np.ones(shape)
    zero = np.zeros(shape)
    return [one, zero, zero, one]


def dp_step(va, vb, h, E):
    """One DP5(4) step across cells where V runs linearly from va to vb.

    ``va``, ``vb``, ``h`` have shape (C,); ``E`` has shape (B,). Returns the
    step matrices with entries of shape (C, B) and the embedded error
    estimate (max-abs entry of the 5th-minus-4th order difference).
    """
    va = np.asarray(va, dtype=float)[:, None]
    vb = np.asarray(vb, dtype=float)[:, None]
    h = np.asarray(h, dtype=float)[:, None]
    E = np.asarray(E, dtype=float)[None, :]
    shape = np.broadcast_shapes(va.shape, E.shape)
    one = np.ones(shape)
    zero = np.zeros(shape)
    ks = []
    for i in range(7):
        q = va + (vb - va) * _C[i] - E
        s11, s12, s21, s22 = one, zero, zero, one
        for j, aij in enumerate(_A[i]):
            if aij == 0.0:
                continue
            k11, k12, k21, k22 = ks[j]
            f = h * aij
            s11 = s11 + f * k11
            s12 = s12 + f * k12
            s21 = s21 + f * k21
            s22 = s22 + f * k22
        # K = A(x) S with A = [[0, 1], [q, 0]]
        ks.append((s21, s22, q * s11, q * s12))
    out = [one.copy(), zero.copy(), zero.copy(), one.copy()]
    err = [zero.copy() for _ in range(4)]
    for i in range(7):
        for e in range(4):
            if _B5[i]:
                out[e] = out[e] + (h * _B5[i]) * ks[i][e]
            if _E[i]:
                err[e] = err[e] + (h * _E[i]) * ks[i][e]
    scale = np.maximum(1.0, np.maximum(np.abs(out[0]) + np.abs(out[1]),
                                       np.abs(out[2]) + np.abs(out[3])))
    errmax = np.maximum.reduce([np.abs(x) for x in err]) / scale
    return tuple(out), errmax


def linear_cell_matrices(va, vb, h, E, rtol=1e-10, _depth=0):
    """Transfer matrices across linear-potential cells, adaptively halved.

    Cells whose embedded error exceeds ``rtol`` for any energy are split in
    two and the halves multiplied, recursively.
    """
    va = np.asarray(va, dtype=float)
    vb = np.asarray(vb, dtype=float)
    h = np.asarray(h, dtype=float)
    mats, err = dp_step(va, vb, h, E)
    bad = np.nonzero((err > rtol).any(axis=1))[0]
    if bad.size:
        if _depth >= MAX_DEPTH:
            raise IntegrationError("adaptive step size underflow in overlay integration")
        vm = 0.5 * (va[bad] + vb[bad])
        left = linear_cell_matrices(va[bad], vm, 0.5 * h[bad], E, rtol, _depth + 1)
        right = linear_cell_matrices(vm, vb[bad], 0.5 * h[bad], E, rtol, _depth + 1)
        prod = mat_mul(right, left)
        mats = tuple(np.array(m) for m in mats)
        for m, p in zip(mats, prod):
            m[bad] = p
    return mats


def const_entries(height, width, E):
    """Elementwise exact matrix entries for psi'' = (height - E) psi."""
    height, width, E = np.broadcast_arrays(np.asarray(height, dtype=float),
                                           np.asarray(width, dtype=float),
                                           np.asarray(E, dtype=float))
    q = E - height
    k = np.sqrt(np.abs(q))
    kw = k * width
    osc = q > 0
    ev = q < 0
    safe_k = np.where(q != 0, k, 1.0)
    with np.errstate(invalid="ignore", over="ignore"):
        c = np.where(osc, np.cos(kw), np.where(ev, np.cosh(kw), 1.0))
        s_over_k = np.where(osc, np.sin(kw) / safe_k,
                            np.where(ev, np.sinh(kw) / safe_k, width))
        ks = np.where(osc, -k * np.sin(kw), np.where(ev, k * np.sinh(kw), 0.0))
    return c, s_over_k, ks, c.copy()


def constant_cell_matrices(height, width, E):
    """Exact transfer matrices shaped (C, B) for C cells and B energies."""
    return const_entries(np.asarray(height, dtype=float)[:, None],
                         np.asarray(width, dtype=float)[:, None],
                         np.asarray(E, dtype=float)[None, :])


def illinois(f, lo, hi, flo=None, fhi=None, xtol=1e-12, maxiter=200):
    """Batched regula falsi (Illinois variant) for bracketed roots.

    ``f`` maps an array of abscissae to an array of values; every bracket
    [lo_i, hi_i] must carry a sign change.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    flo = f(lo) if flo is None else np.array(flo, dtype=float)
    fhi = f(hi) if fhi is None else np.array(fhi, dtype=float)
    side = np.zeros(lo.shape, dtype=int)
    for it in range(maxiter):
        active = (hi - lo) > xtol * np.maximum(1.0, np.abs(lo))
        if not active.any():
            break
        with np.errstate(invalid="ignore", divide="ignore"):
            x = (lo * fhi - hi * flo) / (fhi - flo)
        mid = 0.5 * (lo + hi)
        x = np.where(np.isfinite(x) & (x > lo) & (x < hi), x, mid)
        if it % 4 == 3:
            # periodic bisection guarantees the bracket keeps shrinking
            x = mid
        fx = f(x)
        exact = fx == 0
        left = np.sign(fx) == np.sign(flo)
        # root lies in [x, hi]
        new_lo = np.where(active & left & ~exact, x, lo)
        new_flo = np.where(active & left & ~exact, fx, flo)
        new_hi = np.where(active & ~left & ~exact, x, hi)
        new_fhi = np.where(active & ~left & ~exact, fx, fhi)
        # Illinois: halve the stale endpoint value when the same side repeats
        new_fhi = np.where(active & left & (side == 1), 0.5 * new_fhi, new_fhi)
        new_flo = np.where(active & ~left & (side == -1), 0.5 * new_flo, new_flo)
        side = np.where(active, np.where(left, 1, -1), side)
        lo = np.where(active & exact, x, new_lo)
        hi = np.where(active & exact, x, new_hi)
        flo, fhi = new_flo, new_fhi
    return 0.5 * (lo + hi)
