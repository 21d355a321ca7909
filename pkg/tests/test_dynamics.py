from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from counterrace import dynamics as dy
from counterrace.config_algebra import configuration_of, speed_in_configuration


def test_step_rules():
    s, u = dy.step(dy.CounterState((5, 5)), (0, 1))
    assert s.levels == (6, 6) and u == 2
    s, u = dy.step(dy.CounterState((5, 3)), (0, 1))
    assert s.levels == (5, 4) and u == 1


@pytest.mark.parametrize("pair", [(0, 0), (0, 3), (-1, 1)])
def test_step_rejects_bad_pairs(pair):
    with pytest.raises(IndexError):
        dy.step(dy.CounterState((0, 0, 0)), pair)


def test_one_step_examples():
    F = Fraction
    assert dy.one_step_distribution((0,), 3) == [((1,), F(1))]
    assert dy.one_step_distribution((4,), 3) == [((3,), F(2, 3)), ((5,), F(1, 3))]
    assert dict(dy.one_step_distribution((2, 0), 4)) == {(3, 0): F(1, 6), (1, 0): F(1, 6), (1, 1): F(2, 3)}


gap_vectors = st.integers(3, 8).flatmap(lambda n: st.lists(st.integers(0, 3), min_size=n - 2, max_size=n - 2))


@settings(max_examples=150, deadline=None)
@given(gap_vectors)
def test_one_step_law_is_a_distribution(x):
    n = len(x) + 2
    law = dy.one_step_distribution(x, n)
    total = sum(p for _, p in law)
    assert total == 1
    from math import comb

    for y, p in law:
        assert p > 0 and (p * comb(n, 2)).denominator == 1
        changed = [i for i in range(n - 2) if y[i] != x[i]]
        assert len(changed) <= 2
        assert all(abs(y[i] - x[i]) == 1 for i in changed)


@settings(max_examples=150, deadline=None)
@given(gap_vectors)
def test_expected_updates_equal_configuration_speed(x):
    n = len(x) + 2
    assert dy.expected_updates(x, n) == speed_in_configuration(configuration_of(x, n))


@settings(max_examples=60, deadline=None)
@given(gap_vectors, st.integers(2, 5))
def test_law_depends_only_on_zero_pattern(x, scale):
    # scale positive gaps: the moves (as differences) must not change
    n = len(x) + 2
    big = [g * scale + (scale if g else 0) for g in x]

    def moves(v):
        return sorted((tuple(b - a for a, b in zip(v, y)), p) for y, p in dy.one_step_distribution(v, n))

    assert moves(x) == moves(big)


def test_kernel_matches_python_step():
    n = 6
    rng = np.random.default_rng(3)
    first, second = dy._pair_tables(n)
    draws = rng.integers(0, len(first), size=500)
    levels = np.zeros(n, dtype=np.int64)
    out = np.empty(500, dtype=np.int8)
    dy._run(levels, first, second, draws, out)
    state = dy.CounterState.initial(n)
    ups = []
    for d in draws:
        state, u = dy.step(state, (int(first[d]), int(second[d])))
        ups.append(u)
    assert tuple(levels) == state.levels
    assert list(out) == ups


def test_simulate_two_counters_is_exactly_two():
    est = dy.simulate_speed(2, 10_000, seed=5)
    assert est.mean == 2.0 and est.stderr == 0.0


def test_simulate_reproducible_and_bounded():
    a = dy.simulate_speed(6, 200_000, seed=11)
    b = dy.simulate_speed(6, 200_000, seed=11)
    c = dy.simulate_speed(6, 200_000, seed=11, replica=1)
    assert a == b
    assert a.mean != c.mean
    assert 1 <= a.mean <= 2 and a.stderr > 0


def test_simulate_n4_matches_exact_solution():
    est = dy.simulate_speed(4, 2_000_000, seed=2)
    assert abs(est.mean - 1.3958896) < 4 * est.stderr + 1e-4


def test_n3_zero_gap_frequency():
    xs = dy.sample_gap_states(3, 20_000, thin=7, burn_in=1_000, seed=4)[:, 0]
    p0 = np.mean(xs == 0)
    se = np.sqrt(0.25 * 0.75 / xs.size) * 2  # crude inflation for autocorrelation
    assert abs(p0 - 0.25) < 3 * se


def test_empirical_tails_boundary_values():
    tm = dy.empirical_tails(50, 2.0, seed=1, times=[0.0, 1.0, 2.0])
    assert tm(0, 0.0) == 1.0
    assert all(tm(k, 0.0) == 0.0 for k in tm.levels if k >= 1)
    for t in tm.times:
        vals = [tm(k, t) for k in tm.levels]
        assert all(0 <= v <= 1 for v in vals)
        assert all(a >= b for a, b in zip(vals, vals[1:]))
    rec = tm.to_record()
    assert set(rec["values"][0]) == {"k", "t", "value"}


def test_first_tail_for_many_counters():
    tm = dy.empirical_tails(1000, 1.0, seed=8, times=[1.0])
    assert abs(tm(1, 1.0) - (1 - np.exp(-2.0))) < 0.05


def test_quadratic_drift_examples():
    for k in range(1, 8):
        assert dy.quadratic_drift((k,), 3) == Fraction(-2 * k + 3, 3)
    assert dy.quadratic_drift((0,), 3) == 1
    assert dy.quadratic_drift((30, 0), 4) <= -1


def test_exponential_drift_examples():
    assert dy.exponential_drift((0,), 3) == pytest.approx(np.exp(0.5) - 1)
    m = 12  # beyond 2 ln 256 ~ 11.09
    assert dy.exponential_drift((m, m), 4) <= -1
    for n in range(3, 8):
        assert dy.exponential_drift((0,) * (n - 2), n) <= 2 * (np.exp(0.5) - 1) + 1e-12
    with pytest.raises(ValueError):
        dy.exponential_drift((1,), 3, r=0.0)


def test_far_state_sampler():
    thr = float(dy.quadratic_threshold(5))
    xs = dy.sample_far_states(5, 200, thr, seed=3)
    assert len(xs) == 200 and all(len(x) == 3 and max(x) > thr for x in xs)
    assert xs == dy.sample_far_states(5, 200, thr, seed=3)
