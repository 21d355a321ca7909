from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from counterrace import exact_small as ex
from counterrace.dynamics import one_step_distribution


def test_n3_closed_form():
    s = ex.solve_n3()
    assert s.pi0 == Fraction(1, 4) and s.speed == Fraction(3, 2) and s.tail_rate == Fraction(1, 2)
    assert s.pi(3) == Fraction(3, 32)


def test_n3_transitions_agree_with_dynamics():
    for k in range(6):
        assert sorted(((y,), p) for y, p in ex.n3_transitions(k)) == one_step_distribution((k,), 3)


@pytest.mark.parametrize("k,l", [(0, 0), (3, 0), (0, 4), (2, 5), (1, 1)])
def test_n4_transitions_agree_with_dynamics(k, l):
    assert sorted(ex.n4_transitions(k, l)) == sorted(one_step_distribution((k, l), 4))


@pytest.fixture(scope="module")
def n4():
    return ex.solve_n4(L=200)


def test_n4_speed_and_identities(n4):
    assert 1.3938 <= n4.speed <= 1.3978
    assert abs(n4.speed - (10 / 7 - 2 / 7 * n4.pi0)) < 1e-9
    assert all(abs(r) < 1e-9 for r in n4.balance_residuals())
    assert abs(sum(n4.Pi) - 1) < 1e-12


def test_n4_against_direct_linear_solve():
    # independent oracle: solve pi (P - I) = 0 with a normalisation row
    L = 80
    P = ex._n4_matrix(L)
    size = P.shape[0]
    M = (P.T - sp.identity(size)).tolil()
    M[0, :] = np.ones(size)
    rhs = np.zeros(size)
    rhs[0] = 1.0
    pi = spla.spsolve(M.tocsc(), rhs)
    grid = pi.reshape(L + 1, L + 1)
    direct = 1 + grid[0, 0] + grid[1:, 0].sum() / 3 + grid[0, 1:].sum() / 2 + grid[1:, 1:].sum() / 6
    assert abs(ex.solve_n4(L=L).speed - direct) < 1e-9


def test_n4_truncation_insensitive():
    assert abs(ex.solve_n4(L=100).speed - ex.solve_n4(L=200).speed) < 1e-11


def test_n4_bounds():
    lo, hi = ex.n4_bounds()
    assert (lo, hi) == (Fraction(26, 19), Fraction(10, 7))


def test_n4_convergence_failure():
    with pytest.raises(ex.ConvergenceError):
        ex.solve_n4(L=20, max_iter=3)
    with pytest.raises(ValueError):
        ex.solve_n4(L=5)
