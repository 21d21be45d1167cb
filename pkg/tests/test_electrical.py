import math

import numpy as np
import pytest

from dremobs.electrical import (
    CHAIN_SIZE, DEFAULT_ALPHAS, advance_chain, assemble_phi_z, chain_derivative, check_alphas,
    extend_and_mix, stack_regression, theta_electrical,
)
from dremobs.filters import lowpass_derivative, pure_lag
from dremobs.motor import MotorParams, motor_derivative, step_rk4

P = MotorParams()
ALPHAS = np.array(DEFAULT_ALPHAS)


def sinusoidal_drive(t):
    v = np.array([8 * math.cos(40 * t) + 2 * math.sin(7 * t), 8 * math.sin(40 * t) - 1.5])
    return v


def open_loop_run(alpha, t_end, dt=1e-4, chain0=None):
    """Motor driven by fixed voltages, one chain riding on its current and voltage."""
    def f(t, x):
        v = sinusoidal_drive(t)
        dlam, di, dw = motor_derivative(x[0:2], x[2:4], x[4], v, P)
        ds = chain_derivative(x[5:], x[2:4], v, alpha)
        return np.concatenate([dlam, di, [dw], ds])

    x = np.zeros(5 + CHAIN_SIZE)
    x[0:2] = (0.02, 0.0)
    if chain0 is not None:
        x[5:] = chain0
    for k in range(int(round(t_end / dt))):
        x = step_rk4(x, f, dt, k * dt)
    return x, sinusoidal_drive(t_end)


def test_zero_measurements_keep_zero_chain():
    ds = chain_derivative(np.zeros(CHAIN_SIZE), np.zeros(2), np.zeros(2), 20.0)
    assert np.all(ds == 0.0)


def test_zero_chains_give_constant_column_only():
    states = np.zeros((6, CHAIN_SIZE))
    Psi, Phi = stack_regression(states, np.zeros(2), np.zeros(2), ALPHAS, P)
    assert np.all(Psi == 0.0)
    expected = np.zeros((6, 6))
    expected[:, 5] = -2 / P.Lr
    np.testing.assert_array_equal(Phi, expected)
    _, _, zeta, delta = extend_and_mix(states, np.zeros(2), np.zeros(2), ALPHAS, P)
    assert delta == 0.0 and np.all(zeta == 0.0)


def test_constant_inputs_settle_to_closed_form():
    alpha = 25.0
    i, v = np.array([0.7, -0.2]), np.array([3.0, 1.5])
    s = np.zeros(CHAIN_SIZE)
    dt = 1e-3
    for k in range(2000):
        s = advance_chain(s, lambda t: (i, v), alpha, k * dt, dt)
    expected = np.array([i[0], i[1], v[0], v[1], v @ v / alpha, 2 * (i @ v) / alpha, 0.0,
                         i @ i / alpha, 0.0, 0.0, v @ i / alpha])
    np.testing.assert_allclose(s, expected, atol=1e-12)


def test_chain_matches_filter_primitives():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = rng.normal(size=CHAIN_SIZE)
        i, v = rng.normal(size=2), rng.normal(size=2) * 5
        alpha = rng.uniform(5, 120)
        f_i, df_i, dfi_state = lowpass_derivative(i, s[0:2], alpha)
        f_v, df_v, dfv_state = lowpass_derivative(v, s[2:4], alpha)
        ref = np.concatenate([
            dfi_state, dfv_state,
            [pure_lag(v @ f_v, s[4], alpha)[1],
             pure_lag(i @ f_v + v @ f_i, s[5], alpha)[1],
             pure_lag(v @ df_i - df_v @ df_i / alpha, s[6], alpha)[1],
             pure_lag(i @ f_i, s[7], alpha)[1],
             pure_lag(i @ df_i, s[8], alpha)[1],
             pure_lag(df_i @ df_i, s[9], alpha)[1],
             pure_lag(v @ f_i, s[10], alpha)[1]],
        ])
        np.testing.assert_allclose(chain_derivative(s, i, v, alpha), ref, rtol=1e-13, atol=1e-12)


def test_measurement_scaling():
    rng = np.random.default_rng(4)
    s, i, v = rng.normal(size=CHAIN_SIZE), rng.normal(size=2), rng.normal(size=2)
    c = 3.7
    sc = s.copy()
    sc[0:4] *= c
    sc[4:] *= c * c
    z, phi = assemble_phi_z(s, i, v, 30.0, P)
    zc, phic = assemble_phi_z(sc, c * i, c * v, 30.0, P)
    assert zc == pytest.approx(c * c * z, rel=1e-12)
    assert phic[0] == pytest.approx(c * c * phi[0], rel=1e-12)
    np.testing.assert_allclose(phic[1:5], c * phi[1:5], rtol=1e-12)
    assert phic[5] == phi[5]


def test_regression_ignores_unknown_parameters():
    rng = np.random.default_rng(6)
    states = rng.normal(size=(6, CHAIN_SIZE))
    i, v = rng.normal(size=2), rng.normal(size=2)
    a = stack_regression(states, i, v, ALPHAS, P)
    b = stack_regression(states, i, v, ALPHAS, P._replace(Rr_true=0.9, TL_true=-4.0))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_theta_layout():
    np.testing.assert_array_equal(theta_electrical([2.0, -1.0], 0.5),
                                  [0.5, 2.0, -1.0, 1.0, -0.5, 2.5])


def test_alpha_validation():
    assert check_alphas(DEFAULT_ALPHAS) == []
    assert check_alphas([1, 2, 3]) and check_alphas([1, 2, 3, 4, 5, 5])
    assert any("positive" in e for e in check_alphas([0, 1, 2, 3, 4, 5]))


@pytest.mark.parametrize("alpha", [20.0, 100.0])
def test_regression_holds_on_open_loop_motor(alpha):
    x, v = open_loop_run(alpha, 1.5)
    lam, i = x[0:2], x[2:4]
    z, phi = assemble_phi_z(x[5:], i, v, alpha, P)
    theta = theta_electrical(lam, P.Rr_true)
    scale = abs(z) + np.abs(phi * theta).sum()
    assert abs(z - phi @ theta) < 1e-8 * scale


def test_filter_initial_conditions_are_forgotten():
    alpha = 30.0
    perturbed = np.random.default_rng(8).normal(size=CHAIN_SIZE)
    x0, v = open_loop_run(alpha, 1.0, dt=2e-4)
    x1, _ = open_loop_run(alpha, 1.0, dt=2e-4, chain0=perturbed)
    z0, phi0 = assemble_phi_z(x0[5:], x0[2:4], v, alpha, P)
    z1, phi1 = assemble_phi_z(x1[5:], x1[2:4], v, alpha, P)
    assert abs(z1 - z0) < 1e-9 * (1 + abs(z0))
    np.testing.assert_allclose(phi1, phi0, atol=1e-9 * (1 + np.abs(phi0).max()))
