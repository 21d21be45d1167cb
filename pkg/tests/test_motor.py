import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dremobs.motor import (
    ControllerGains, IntegrationFault, MotorParams, foc_control, foc_tracking,
    motor_derivative, rotation, skew, step_rk4,
)

P = MotorParams()
G = ControllerGains()
finite = st.floats(-50, 50, allow_nan=False)


def vec(a, b):
    return np.array([a, b], dtype=float)


def test_derived_constants_from_inductances():
    assert P.beta == pytest.approx(0.117 / 0.14, rel=1e-15)
    assert P.sigma == pytest.approx(1 - 0.117**2 / 0.14**2, rel=1e-15)
    assert P.sigma == pytest.approx(0.3016, abs=1e-4)


def test_unforced_origin_is_an_equilibrium():
    p = P._replace(TL_true=0.0)
    dlam, di, dw = motor_derivative(vec(0, 0), vec(0, 0), 0.0, vec(0, 0), p)
    assert np.all(dlam == 0) and np.all(di == 0) and dw == 0


def test_pure_flux_decay_without_current():
    p = P._replace(TL_true=0.0)
    dlam, _, dw = motor_derivative(vec(1, 0), vec(0, 0), 0.0, vec(0, 0), p)
    np.testing.assert_allclose(dlam, [-p.Rr_true / p.Lr, 0.0], rtol=1e-15)
    assert dw == 0.0


@settings(max_examples=60, deadline=None)
@given(finite, finite, finite, finite, finite, finite, finite)
def test_torque_balance_holds_identically(l0, l1, i0, i1, w, v0, v1):
    lam, i = vec(l0, l1) * 0.01, vec(i0, i1)
    _, _, dw = motor_derivative(lam, i, w, vec(v0, v1), P)
    torque = lam @ skew(i)  # lam^T J i
    scale = P.J * abs(dw) + abs(P.n_p * P.beta * torque) + abs(P.TL_true)
    assert abs(P.J * dw + P.n_p * P.beta * torque + P.TL_true) <= 1e-13 * max(scale, 1e-12)


def test_current_equation_written_out():
    lam, i, w, v = vec(0.03, -0.01), vec(1.2, 0.4), 17.0, vec(5.0, -3.0)
    _, di, _ = motor_derivative(lam, i, w, v, P)
    b, s = P.beta, P.sigma
    Jlam = np.array([-lam[1], lam[0]])
    rhs = -(P.Rs + P.Rr_true * b * b) * i + b * (P.Rr_true / P.Lr * lam - P.n_p * w * Jlam) + v
    np.testing.assert_allclose(P.Ls * s * di, rhs, rtol=1e-13)


def test_non_finite_input_is_a_fault():
    with pytest.raises(FloatingPointError):
        motor_derivative(vec(np.nan, 0), vec(0, 0), 0.0, vec(0, 0), P)


@pytest.mark.parametrize("delta", [0.0, 0.3, -2.0, math.pi, 5.5])
def test_rotations_are_proper_orthogonal(delta):
    R = rotation(delta)
    np.testing.assert_allclose(R @ R.T, np.eye(2), atol=1e-15)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-15)


def test_zero_errors_and_integrators_give_zero_voltage():
    lam = vec(G.lambda_norm_ref, 0.0)
    omega = G.omega_ref
    # choose the current equal to its reference so every PI input is zero
    norm = G.lambda_norm_ref
    id_ref = norm / P.M
    iq_ref = 0.0
    v, dctrl, floored = foc_control(lam, vec(id_ref, iq_ref), omega, np.zeros(4), G, P,
                                    P.Rr_true, 1e-6)
    assert not floored
    np.testing.assert_allclose(v, 0.0, atol=1e-12)
    np.testing.assert_allclose(dctrl, 0.0, atol=1e-12)


def test_aligned_flux_makes_dq_the_fixed_frame():
    # delta = 0: the dq quantities are the fixed-frame ones, checked by hand
    lam = vec(0.04, 0.0)
    i = vec(0.1, 0.2)
    v0, _, _ = foc_control(lam, i, 10.0, np.zeros(4), G, P, P.Rr_true, 1e-6)
    id_ref = 0.04 / P.M + P.Lr / (P.Rr_true * P.M) * G.Klp * (G.lambda_norm_ref - 0.04)
    iq_ref = P.J * P.Lr / (P.M * 0.04) * G.Kwp * (G.omega_ref - 10.0)
    np.testing.assert_allclose(v0, [G.Kp * (id_ref - 0.1), G.Kp * (iq_ref - 0.2)], rtol=1e-13)


def test_controller_commutes_with_rotations():
    lam = vec(0.04, 0.0)
    i = vec(0.1, 0.2)
    v0, _, _ = foc_control(lam, i, 10.0, np.zeros(4), G, P, P.Rr_true, 1e-6)
    rot = 0.7
    R = rotation(rot)
    v1, _, _ = foc_control(R @ lam, R @ i, 10.0, np.zeros(4), G, P, P.Rr_true, 1e-6)
    np.testing.assert_allclose(v1, R @ v0, rtol=1e-12, atol=1e-12)


def test_flux_floor_is_flagged():
    _, _, floored = foc_tracking(vec(0, 0), vec(0, 0), 0.0, np.zeros(4), G, P, P.Rr_true,
                                 1e-6, G.lambda_norm_ref, G.omega_ref)
    assert floored


def test_parameter_validation_lists_problems():
    bad = MotorParams(Ls=-1.0, M=0.2, n_p=0)
    errors = bad.validate()
    assert any("Ls" in e for e in errors) and any("n_p" in e for e in errors)
    assert MotorParams(M=0.15).validate()  # sigma would be negative
    assert ControllerGains(Kp=0.0).validate()
    assert P.validate() == [] and G.validate() == []


def test_rk4_zero_field_leaves_state_unchanged():
    x = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(step_rk4(x, lambda t, y: np.zeros_like(y), 1e-3), x)


def test_rk4_one_step_of_exponential_decay():
    dt = 1e-3
    x = step_rk4(np.array([1.0]), lambda t, y: -y, dt)
    # local error of classical RK4 on x' = -x is dt^5/120
    assert abs(x[0] - math.exp(-dt)) <= dt**5 / 120 * 1.01


def test_rk4_global_order():
    def f(t, y):
        return np.array([y[1], -math.sin(y[0]) + 0.3 * math.cos(t)])

    def run(dt):
        y = np.array([1.0, 0.0])
        for k in range(int(round(2.0 / dt))):
            y = step_rk4(y, f, dt, k * dt)
        return y

    ref = run(1e-4)
    e1 = np.abs(run(0.02) - ref).max()
    e2 = np.abs(run(0.01) - ref).max()
    assert e1 / e2 >= 8.0


def test_rk4_rejects_bad_step_and_reports_blowup_time():
    with pytest.raises(ValueError):
        step_rk4(np.ones(1), lambda t, y: y, 0.0)
    with pytest.raises(IntegrationFault) as info:
        step_rk4(np.ones(1), lambda t, y: np.array([np.inf]), 0.1, t=1.5)
    assert info.value.t == pytest.approx(1.6)  # time of the non-finite result


def test_unforced_motor_dissipates():
    # v = 0, TL = 0: flux, current and speed all die out
    p = P._replace(TL_true=0.0)

    def f(t, x):
        dlam, di, dw = motor_derivative(x[0:2], x[2:4], x[4], np.zeros(2), p)
        return np.concatenate([dlam, di, [dw]])

    x = np.array([0.05, -0.02, 2.0, 1.0, 30.0])
    xi = []
    for k in range(20000):
        x = step_rk4(x, f, 1e-4, k * 1e-4)
        xi.append(x[0:2] @ x[0:2])
    xi = np.array(xi)
    assert xi[-1] < 1e-12 * xi[0] + 1e-20
    # the squared flux norm obeys d/dt xi = -2 (Rr/Lr) xi + 2 Rr beta lam.i; after the
    # currents have died out it is monotone
    assert np.all(np.diff(xi[5000:]) <= 0)
