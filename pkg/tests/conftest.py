import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import brentq

from zonecontrol.potential import make_dirac_comb, make_free, make_kronig_penney

ACCEPTANCE_LINES = []


def comb_disc(E, v=4.0, a=math.pi):
    """Closed-form half-trace for a Dirac comb, E > 0."""
    k = math.sqrt(E)
    return math.cos(k * a) + v / (2 * k) * math.sin(k * a)


def comb_edges(n_gaps, v=4.0, a=math.pi):
    """Gap edges of a positive-strength comb: lower edge n^2, upper edge from the dispersion."""
    out = []
    for n in range(1, n_gaps + 1):
        lo = (n * math.pi / a) ** 2
        target = (-1) ** n
        hi = brentq(lambda e: comb_disc(e, v, a) - target, lo + 1e-9,
                    ((n + 1) * math.pi / a) ** 2 - 1e-9, xtol=1e-15, rtol=1e-15)
        out.append((lo, hi))
    return out


def coupled_monodromy(v11, eps, coupling, kind, E):
    """Independent 4x4 propagation of the coupled pair over one period."""
    M = np.eye(4)
    for s in v11.spikes:
        if s.position == 0.0:
            M = _kick(np.diag([s.strength, s.strength])) @ M
    if kind == "delta":
        M = _kick(np.array([[0.0, coupling], [coupling, 0.0]])) @ M
    for seg in v11.segments:
        W = np.array([[seg.height + eps - E, coupling if kind == "constant" else 0.0],
                      [coupling if kind == "constant" else 0.0, seg.height + eps - E]])
        A = np.block([[np.zeros((2, 2)), np.eye(2)], [W, np.zeros((2, 2))]])
        M = expm(A * seg.width) @ M
    return M


def _kick(S):
    K = np.eye(4)
    K[2:, :2] = S
    return K


@pytest.fixture(scope="session")
def comb():
    return make_dirac_comb(math.pi, 4.0)


@pytest.fixture(scope="session")
def free():
    return make_free(math.pi)


@pytest.fixture(scope="session")
def kp():
    return make_kronig_penney(2.0, 0.5, 3.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
