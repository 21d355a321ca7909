import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from counterrace import meanfield as mf


@pytest.fixture(scope="module")
def short():
    return mf.integrate(12, 10.0, 1e-3, record_dt=1e-3)


def test_first_level_closed_form(short):
    assert np.abs(short.phi[1] - (1 - np.exp(-short.times))).max() < 1e-8
    assert np.all(short.phi[0] == 1.0)
    assert np.all(short.phi[1:, 0] == 0.0)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5, 5.0, 10.0])
def test_second_level_quadrature(short, t):
    assert abs(short.at(2, t) - mf.phi_integral_form(2, t)) < 1e-6


def test_third_level_spot_check(short):
    assert abs(short.at(3, 2.0) - mf.phi_integral_form(3, 2.0)) < 1e-6


def test_against_independent_integrator(short):
    K = 12

    def rhs(_, y):
        full = np.concatenate(([1.0], y))
        return full[:-1] * (full[:-1] - full[1:])

    sol = solve_ivp(rhs, (0, 10), np.zeros(K), rtol=1e-11, atol=1e-13, dense_output=True)
    for t in (1.0, 4.0, 10.0):
        ref = sol.sol(t)
        got = [short.at(k, t) for k in range(1, K + 1)]
        assert np.allclose(got, ref, atol=1e-8)


def test_ordering_and_bounds(short):
    phi = short.phi
    assert np.all(np.diff(phi, axis=0) <= 1e-12)
    assert np.all(np.diff(phi, axis=1) >= -1e-12)
    assert phi.min() >= -1e-12 and phi.max() <= 1 + 1e-12


def test_order_of_convergence():
    T = 3.0
    vals = [mf.integrate(6, T, dt).phi[:, -1] for dt in (0.2, 0.1, 0.05)]
    e1 = np.abs(vals[0] - vals[1]).max()
    e2 = np.abs(vals[1] - vals[2]).max()
    assert math.log2(e1 / e2) >= 3.5


def test_step_size_error():
    with pytest.raises(mf.StepSizeError):
        mf.integrate(10, 20.0, 3.0)


def test_argument_validation():
    with pytest.raises(ValueError):
        mf.integrate(1, 1.0, 0.1)
    with pytest.raises(ValueError):
        mf.integrate(5, 1.0, 0.1, model="other")


def test_insufficient_horizon():
    with pytest.raises(mf.InsufficientHorizonError):
        mf.wave_speed(mf.integrate(50, 3.0, 1e-2))


@pytest.fixture(scope="module")
def front():
    st = mf.integrate(120, 220.0, 2e-3)
    return st, mf.wave_speed(st, profile_levels=(60, 80, 100))


def test_front_speed_and_spacing(front):
    st, w = front
    assert 1.23 <= w.speed <= 1.255
    assert w.speed == pytest.approx(2 * w.speed_phi)
    assert np.all(np.diff(w.crossing_times) > 0)
    sp = w.spacing
    assert np.abs(np.diff(sp[99:])).max() < 1e-3


def test_profile_collapse(front):
    _, w = front
    assert w.collapse_error < 0.01
    H = w.profile[~np.isnan(w.profile)]
    assert np.all(np.diff(H) >= -1e-12)
    assert H[0] < 1e-6 and H[-1] > 1 - 1e-6


def test_tail_report(front):
    _, w = front
    rep = mf.tail_diagnostics(w)
    assert rep["left"]["decades"] >= 4
    for side in ("left", "right"):
        if "exponential" in rep[side]:
            assert 0 <= rep[side]["exponential"]["r2"] <= 1


def test_power_of_two_baseline():
    st = mf.integrate(80, 180.0, 2e-3, model="power2")
    assert abs(mf.wave_speed(st).speed - 1.0) < 0.02


def test_psi_clock(short):
    assert short.psi(1, 0.5) == pytest.approx(1 - math.exp(-1.0), abs=1e-8)
