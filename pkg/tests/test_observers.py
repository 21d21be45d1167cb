import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dremobs.motor import MotorParams, motor_derivative, step_rk4
from dremobs.observers import (
    INSUFFICIENT, NON_L2, PE_LIKE, ExcitationMonitor, classify_excitation, flux_estimate,
    flux_observer_step, rr_estimator_step, tl_omega_step,
)

P = MotorParams()
K = P.sigma * P.Ls / P.beta


def test_zero_determinant_freezes_the_corrections():
    chi, i, v = np.array([0.1, -0.2]), np.array([0.3, 0.4]), np.array([2.0, 1.0])
    dchi, lam_hat = flux_observer_step(chi, i, v, np.array([5.0, 5.0]), 0.0, 1e9, P)
    np.testing.assert_allclose(dchi, v / P.beta - P.Rs / P.beta * i, rtol=1e-15)
    np.testing.assert_allclose(lam_hat, chi - K * i, rtol=1e-15)
    assert rr_estimator_step(0.3, 7.0, 0.0, 1e12) == 0.0
    dTL, _ = tl_omega_step(np.array([1.0, 2.0]), 0.0, np.zeros(2), np.zeros(2), 0.5, 3.0,
                           1e6, 1e6, P)
    assert dTL == 0.0


def test_flux_error_obeys_scalar_gain_dynamics():
    """e = lam_hat - lam satisfies de/dt = -gamma Delta^2 e along any motor trajectory."""
    rng = np.random.default_rng(0)
    for _ in range(20):
        lam, i, v = rng.normal(size=2) * 0.05, rng.normal(size=2), rng.normal(size=2) * 5
        omega, delta, gamma = rng.uniform(-100, 100), rng.normal(), 10 ** rng.uniform(0, 4)
        e = rng.normal(size=2) * 0.01
        chi = lam + e + K * i
        dlam, di, _ = motor_derivative(lam, i, omega, v, P)
        dchi, lam_hat = flux_observer_step(chi, i, v, delta * lam, delta, gamma, P)
        np.testing.assert_allclose(lam_hat, lam + e, rtol=1e-12)
        de = dchi - K * di - dlam
        np.testing.assert_allclose(de, -gamma * delta**2 * e, rtol=1e-9, atol=1e-12)


def test_rr_estimate_decays_exponentially_for_constant_determinant():
    Rr, delta, gamma, dt = 0.2, 0.5, 8.0, 1e-3
    x = np.array([0.0])
    for k in range(1000):
        x = step_rk4(x, lambda t, y: np.array([rr_estimator_step(y[0], delta * Rr, delta, gamma)]),
                     dt, k * dt)
    assert x[0] - Rr == pytest.approx(-Rr * math.exp(-gamma * delta**2 * 1.0), rel=1e-9)


def test_rr_fixed_point():
    assert rr_estimator_step(0.2, 0.3 * 0.2, 0.3, 1e6) == 0.0


def test_load_and_speed_fixed_point_reproduces_the_motor():
    p = P._replace(TL_true=0.4)
    lam, i, omega, delta = np.array([0.03, 0.01]), np.array([0.5, -0.7]), 42.0, 0.8
    zeta = delta * np.array([p.TL_true, omega])
    dTL, domega = tl_omega_step(zeta, delta, lam, i, p.TL_true, omega, 1e3, 1e3, p)
    _, _, dw = motor_derivative(lam, i, omega, np.zeros(2), p)
    assert dTL == 0.0
    assert domega == pytest.approx(dw, rel=1e-13)


def test_load_estimate_closed_form():
    # with constant Delta the load error alone decays at gamma Delta^2
    TL, delta, gamma = 0.05, 2.0, 3.0
    dTL, _ = tl_omega_step(np.array([delta * TL, 0.0]), delta, np.zeros(2), np.zeros(2),
                           0.0, 0.0, gamma, 0.0, P)
    assert dTL == pytest.approx(gamma * delta**2 * TL)


def test_flux_estimate_formula():
    chi, i = np.array([1.0, 2.0]), np.array([0.5, -0.5])
    np.testing.assert_allclose(flux_estimate(chi, i, P), chi - K * i)


def uniform_integral(delta_fn, t_end, n=4001):
    t = np.linspace(0, t_end, n)
    sq = np.array([delta_fn(s) ** 2 for s in t])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (sq[1:] + sq[:-1]))])
    return t, integral


def test_classify_zero_determinant_is_insufficient():
    t, integral = uniform_integral(lambda s: 0.0, 10.0)
    assert classify_excitation(t, integral, 1.0) == (INSUFFICIENT, 0.0)


@pytest.mark.parametrize("c", [1e-15, 1e-3, 7.0])
def test_classify_constant_is_pe_like_at_any_scale(c):
    t, integral = uniform_integral(lambda s: c, 10.0)
    label, wmin = classify_excitation(t, integral, 1.0)
    assert label == PE_LIKE
    assert wmin == pytest.approx(c * c * 1.0, rel=1e-9)


def test_classify_square_integrable_decay_is_insufficient():
    t, integral = uniform_integral(lambda s: 1 / (1 + s), 100.0, n=20001)
    assert classify_excitation(t, integral, 1.0)[0] == INSUFFICIENT


def test_classify_intermittent_is_non_l2():
    t, integral = uniform_integral(lambda s: 1.0 if (s % 1.0) >= 0.5 else 0.0, 10.0, n=10001)
    label, wmin = classify_excitation(t, integral, 0.25)
    assert label == NON_L2 and wmin == pytest.approx(0.0, abs=1e-3)


def test_classify_needs_a_full_window():
    t, integral = uniform_integral(lambda s: 1.0, 0.5)
    assert classify_excitation(t, integral, 1.0)[0] == INSUFFICIENT


def test_streaming_monitor_matches_batch():
    mon = ExcitationMonitor(window=0.5)
    dt = 1e-3
    for k in range(3001):
        mon.update(0.2, dt)
    assert mon.integral_delta_sq == pytest.approx(0.04 * 3.0, rel=1e-12)
    assert mon.classification == PE_LIKE
    assert mon.window_min == pytest.approx(0.04 * 0.5, rel=1e-6)
    assert ExcitationMonitor().classification == INSUFFICIENT


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60))
def test_monitor_integral_never_decreases(deltas):
    mon = ExcitationMonitor()
    last = 0.0
    for d in deltas:
        mon.update(d, 1e-3)
        assert mon.integral_delta_sq >= last
        last = mon.integral_delta_sq
