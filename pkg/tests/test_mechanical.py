import math

import numpy as np
import pytest

from dremobs.mechanical import (
    MECH_SIZE, electrical_frequency, mechanical_derivative, mechanical_regression, mix_mechanical,
    steady_state_delta,
)
from dremobs.motor import MotorParams, motor_derivative, rotation, step_rk4

P = MotorParams()
A = 50.0


def rotating_flux(norm, rate):
    return lambda t: norm * np.array([math.cos(rate * t), math.sin(rate * t)])


def run_filters(lam_fn, t_end, dt=1e-4, i_fn=None, p=P):
    i_fn = i_fn or (lambda t: np.zeros(2))

    def f(t, s):
        return mechanical_derivative(s, lam_fn(t), p.Rr_true, i_fn(t), A, p)

    s = np.zeros(MECH_SIZE)
    for k in range(int(round(t_end / dt))):
        s = step_rk4(s, f, dt, k * dt)
    return s


def phasor_delta(norm, rate, a, J, n_p=1):
    """det[c1, c2] for the two filtered phasors, worked out in complex form."""
    h = a / complex(a, rate)  # a/(p+a) at p = j rate
    c2 = h * n_p * norm * 1j  # skew-rotated flux, filtered
    c1 = c2 / (J * complex(a, rate))  # one more 1/(p+a), then / J
    return (c1.conjugate() * c2).imag


def test_zero_flux_gives_zero_regressor():
    s = run_filters(lambda t: np.zeros(2), 0.2, dt=1e-3)
    z, Phi = mechanical_regression(s, np.zeros(2), A, P)
    assert np.all(Phi == 0.0)
    _, _, zeta, delta = mix_mechanical(s, np.zeros(2), A, P)
    assert delta == 0.0 and np.all(zeta == 0.0)


def test_mixing_with_identity_regressor():
    # hand-built state whose regressor is the identity after scaling
    s = np.zeros(MECH_SIZE)
    s[6:8] = (P.J, 0.0)
    s[4:6] = (0.0, 1.0)
    s[2:4] = (3.0, -2.0)  # z = eta1 filter when lam and s[0:2] agree and s[8:10] = 0
    z, Phi = mechanical_regression(s, np.zeros(2), A, P)
    np.testing.assert_allclose(Phi, np.eye(2), atol=1e-15)
    _, _, zeta, delta = mix_mechanical(s, np.zeros(2), A, P)
    assert delta == pytest.approx(1.0)
    np.testing.assert_allclose(zeta, [3.0, -2.0])


def test_electrical_frequency_examples():
    assert electrical_frequency(120.0, 0.5, 0.3, 0.0) == 120.0
    assert electrical_frequency(10.0, 0.5, 0.2, 1.0, n_p=2) == pytest.approx(20.0 + 0.2 / 0.5)
    with pytest.raises(ValueError):
        electrical_frequency(1.0, 0.0, 1.0, 1.0)


def test_prediction_is_forty_five_degrees_at_the_filter_pole():
    # varpi = a: |H|^2 = 1/2, sin(psi) = 1/sqrt(2)
    got = steady_state_delta(A, 0.5, P.Rr_true, 0.0, A, P.J)
    assert got == pytest.approx(0.25 / P.J * 0.5 / math.sqrt(2 * A * A) / math.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("rate", [10.0, 50.0, 140.0])
def test_prediction_matches_phasor_algebra(rate):
    assert steady_state_delta(rate, 0.3, P.Rr_true, 0.0, A, P.J) == pytest.approx(
        phasor_delta(0.3, rate, A, P.J), rel=1e-12)


@pytest.mark.parametrize("rate", [20.0, 120.0])
def test_delta_settles_to_prediction(rate):
    norm = 0.04
    lam_fn = rotating_flux(norm, rate)
    s = run_filters(lam_fn, 0.6)
    _, _, _, delta = mix_mechanical(s, lam_fn(0.6), A, P)
    assert delta == pytest.approx(phasor_delta(norm, rate, A, P.J), rel=1e-6)


def test_delta_is_rotation_invariant():
    rng = np.random.default_rng(1)
    s = rng.normal(size=MECH_SIZE)
    lam = rng.normal(size=2)
    R = rotation(1.1)
    sr = np.concatenate([R @ s[2 * k: 2 * k + 2] for k in range(5)])
    d0 = mix_mechanical(s, lam, A, P)[3]
    d1 = mix_mechanical(sr, R @ lam, A, P)[3]
    assert d1 == pytest.approx(d0, rel=1e-12)


def test_regression_holds_on_open_loop_motor():
    """z_m = Phi_m (TL, omega) after the filter transients, with the true signals."""
    dt = 1e-4
    p = P._replace(TL_true=0.3)

    def drive(t):
        return np.array([6 * math.cos(30 * t), 6 * math.sin(30 * t)])

    def f(t, x):
        dlam, di, dw = motor_derivative(x[0:2], x[2:4], x[4], drive(t), p)
        ds = mechanical_derivative(x[5:], x[0:2], p.Rr_true, x[2:4], A, p)
        return np.concatenate([dlam, di, [dw], ds])

    x = np.zeros(5 + MECH_SIZE)
    x[0:2] = (0.02, 0.0)
    for k in range(int(round(1.0 / dt))):
        x = step_rk4(x, f, dt, k * dt)
    z, Phi = mechanical_regression(x[5:], x[0:2], A, p)
    theta = np.array([p.TL_true, x[4]])
    scale = np.abs(z).max() + np.abs(Phi).max() * np.abs(theta).max()
    np.testing.assert_allclose(z, Phi @ theta, atol=1e-8 * scale)
