import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from counterrace import config_algebra as ca
from counterrace.dynamics import one_step_distribution
from counterrace.lp_opt import enumerate_configurations

F = Fraction


def oracle_increments(c):
    """Expected gap increments by exhaustive enumeration of every pair."""
    x = c.representative_gaps(3)
    out = {k: F(0) for k in range(1, c.n - 1)}
    for y, p in one_step_distribution(x, c.n):
        for k in out:
            out[k] += p * (y[k - 1] - x[k - 1])
    return out


@pytest.mark.parametrize("n", range(4, 9))
def test_increment_table_matches_oracle(n):
    for c in enumerate_configurations(n):
        assert ca.expected_increments(c) == oracle_increments(c), c


def test_configuration_validation():
    with pytest.raises(ValueError):
        ca.Configuration((1, 2))
    with pytest.raises(ValueError):
        ca.Configuration((2, 0, 1))
    c = ca.Configuration((3, 1, 2))
    assert c.n == 6 and c.m == 3 and c.cumulative == (0, 3, 4, 6) and str(c) == "(3,1,2)"


def test_configuration_of_roundtrip():
    c = ca.Configuration((3, 1, 2))
    assert ca.configuration_of(c.representative_gaps(), 6) == c
    assert ca.configuration_of((0, 4, 0, 2), 6) == ca.Configuration((3, 2, 1))


def test_speed_in_configuration():
    assert ca.speed_in_configuration(ca.Configuration((4,))) == 2
    assert ca.speed_in_configuration(ca.Configuration((2, 2))) == F(4, 3)


def test_test_function_vanishes_at_minus_one():
    with pytest.raises(ValueError):
        ca.TestFunction({-1: 1, 0: 0}, 3)
    h = ca.TestFunction.quadratic(F(-1, 6), F(1, 2), 5)
    assert h(-1) == 0 and h(2) == F(-1, 6) * 3 + F(3, 2)


def random_h(n, seed):
    import random

    rnd = random.Random(seed)
    return ca.TestFunction({k: F(rnd.randint(-9, 9), rnd.randint(1, 5)) for k in range(0, n + 1)}, n)


@pytest.mark.parametrize("n", range(4, 10))
def test_telescoped_equals_direct(n):
    for seed, c in enumerate(enumerate_configurations(n)):
        h = random_h(n, seed)
        assert ca.drift_functional(c, h, F(7, 5)) == ca.drift_functional_direct(c, h, F(7, 5))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2), st.integers(1, 8), st.integers(1, 8), st.integers(-8, 8), st.integers(0, 6))
def test_q_lemma_closed_form(order, a, b, beta, l):
    if not -b <= beta <= a:
        return
    assert ca.q_n(order, a, b, beta) == ca.q_n_direct(order, a, b, beta, l)


@pytest.mark.parametrize("n", range(6, 12))
def test_d_k_matches_difference_of_functionals(n):
    A, B = F(-1, 2 * (n - 2)), F(1, 2)
    h = ca.TestFunction.quadratic(A, B, n)
    for c in enumerate_configurations(n):
        for k in range(2, c.m + 1):
            if k == c.m and c.alpha[-1] in (1, 2):
                continue
            a, b = c.alpha[k - 2], c.alpha[k - 1]
            for beta in range(-b, a + 1):
                if k == 2 and 0 < a - beta < 2:
                    continue  # would leave a lone counter on top
                moved = ca.move_counters(c, k, beta)
                diff = ca.drift_functional(c, h) - ca.drift_functional(moved, h)
                assert ca.d_k(c, k, beta, A, B) == diff, (c, k, beta)


def test_d_k_domain_errors():
    c = ca.Configuration((3, 2))
    with pytest.raises(ValueError):
        ca.d_k(c, 2, 1, F(-1, 6), F(1, 2))
    c = ca.Configuration((3, 3))
    with pytest.raises(ValueError):
        ca.d_k(c, 2, 4, F(-1, 6), F(1, 2))


@pytest.mark.parametrize("n", range(5, 15))
def test_reduction_never_increases_the_bound_term(n):
    h = ca.TestFunction.quadratic(F(-1, 2 * (n - 2)), F(1, 2), n)
    targets = {ca.drift_functional(c, h) for c in ca.worst_case_reduce(n)}
    for c in enumerate_configurations(n):
        path = list(ca.reduce_configuration(c))
        vals = [ca.drift_functional(x, h) for x in path]
        assert all(b <= a for a, b in zip(vals, vals[1:])), (c, path)
        assert vals[-1] in targets, (c, path[-1])


@pytest.mark.parametrize("n", range(5, 13))
def test_candidates_attain_global_minimum(n):
    h = ca.TestFunction.quadratic(F(-1, 2 * (n - 2)), F(1, 2), n)
    best_all = min(ca.drift_functional(c, h) for c in enumerate_configurations(n))
    best_cand = min(ca.drift_functional(c, h) for c in ca.worst_case_reduce(n))
    assert best_all == best_cand


def test_worst_case_reduce_examples():
    assert ca.Configuration((6, 5, 1)) in ca.worst_case_reduce(12)
    assert all(c.n == 12 for c in ca.worst_case_reduce(12))
    with pytest.raises(ValueError):
        ca.worst_case_reduce(4)


def test_table1_csv_has_exact_fractions():
    text = ca.table1_csv(7)
    lines = text.strip().splitlines()
    assert len(lines) > 1
    assert all("." not in cell for line in lines[1:] for cell in line.split(","))
