from fractions import Fraction as Fr
from itertools import product

import numpy as np
import pytest

from kirchlab import integrator as itg

A = [[Fr(1, 4), 0, 0, 0, 0],
     [Fr(1, 2), Fr(1, 4), 0, 0, 0],
     [Fr(17, 50), Fr(-1, 25), Fr(1, 4), 0, 0],
     [Fr(371, 1360), Fr(-137, 2720), Fr(15, 544), Fr(1, 4), 0],
     [Fr(25, 24), Fr(-49, 48), Fr(125, 16), Fr(-85, 12), Fr(1, 4)]]
B = A[-1]
B_HAT = [Fr(59, 48), Fr(-17, 96), Fr(225, 32), Fr(-85, 12), Fr(0)]
C = [sum(row) for row in A]
S = range(5)


def conditions(b, order):
    """Butcher order conditions up to ``order`` (exact arithmetic)."""
    conds = [sum(b) - 1]
    if order >= 2:
        conds.append(sum(b[i] * C[i] for i in S) - Fr(1, 2))
    if order >= 3:
        conds.append(sum(b[i] * C[i] ** 2 for i in S) - Fr(1, 3))
        conds.append(sum(b[i] * A[i][j] * C[j] for i, j in product(S, S)) - Fr(1, 6))
    if order >= 4:
        conds.append(sum(b[i] * C[i] ** 3 for i in S) - Fr(1, 4))
        conds.append(sum(b[i] * C[i] * A[i][j] * C[j] for i, j in product(S, S)) - Fr(1, 8))
        conds.append(sum(b[i] * A[i][j] * C[j] ** 2 for i, j in product(S, S)) - Fr(1, 12))
        conds.append(sum(b[i] * A[i][j] * A[j][k] * C[k] for i, j, k in product(S, S, S)) - Fr(1, 24))
    return conds


def test_tableau_matches_module_constants():
    np.testing.assert_allclose(itg.A, np.array(A, dtype=float), rtol=0, atol=1e-16)
    np.testing.assert_allclose(itg.B_HAT, np.array(B_HAT, dtype=float), rtol=0, atol=1e-16)
    assert itg.GAMMA == 0.25


def test_main_method_has_order_four():
    assert all(c == 0 for c in conditions(B, 4))


def test_embedded_method_has_order_three_not_four():
    assert all(c == 0 for c in conditions(B_HAT, 3))
    assert any(c != 0 for c in conditions(B_HAT, 4))


def test_stiffly_accurate_and_l_stable():
    assert B == A[-1]
    Am = np.array(A, dtype=float)
    # R(inf) = 1 - b^T A^{-1} 1
    r_inf = 1.0 - np.array(B, dtype=float) @ np.linalg.solve(Am, np.ones(5))
    assert abs(r_inf) < 1e-12


class _Linear:
    """y' = -k y with k frozen in the stage solve."""

    def __init__(self, k):
        self.k = k

    def coefficient(self, y):
        return 1.0

    def solve_stage(self, t, z, hg, c):
        return z / (1 + hg * self.k), c

    def filter_error(self, t, e, hg, c):
        return e / (1 + hg * self.k)

    def quadrature(self, ts, ys, cs):
        return ys * ys

    def scale(self, y):
        return np.abs(y)

    def check(self, t, y):
        pass


def test_linear_decay_and_carried_integral():
    k = np.array([1.0, 1e4])
    t_out = np.linspace(0, 2, 11)
    Y, _, Q, stats = itg.integrate(_Linear(k), np.ones(2), t_out, 1e-10, 1e-14)
    np.testing.assert_allclose(Y[:, 0], np.exp(-t_out), rtol=1e-8)
    assert np.all(np.abs(Y[1:, 1]) < 1e-12)
    np.testing.assert_allclose(Q[:, 0], (1 - np.exp(-2 * t_out)) / 2, rtol=1e-8, atol=1e-14)
    assert stats.accepted > 0


def test_error_decreases_with_tolerance():
    t_out = np.array([0.0, 5.0])
    errs = []
    for tol in (1e-6, 1e-8, 1e-10):
        Y, *_ = itg.integrate(_Linear(np.array([1.0])), np.ones(1), t_out, tol, 1e-16)
        errs.append(abs(Y[-1, 0] - np.exp(-5.0)))
    assert errs[0] > errs[1] > errs[2]


def test_step_budget_exhaustion():
    with pytest.raises(itg.MaxStepsExceeded) as info:
        itg.integrate(_Linear(np.array([1.0])), np.ones(1), np.array([0.0, 100.0]), 1e-12, 1e-16, max_steps=5)
    assert info.value.t < 100.0
