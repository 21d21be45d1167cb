"""Augmented closed-loop system advanced by a single fixed-step RK4.

The state vector stacks motor, controller integrators, the six electrical
regression chains, the mechanical chain, the estimators and two running
integrals of the squared mixing determinants, so every subsystem sees the
same time base.  The stepping loop and telemetry extraction are compiled.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numba import njit

from .drem import adjugate_det
from .electrical import CHAIN_SIZE, N_ALPHA, chain_derivative, extend_and_mix
from .mechanical import MECH_SIZE, mechanical_derivative, mix_mechanical
from .motor import beta_of, foc_tracking, motor_rhs, sigma_of
from .observers import flux_estimate, flux_observer_step, rr_estimator_step, tl_omega_step

# state layout
LAM = 0
CUR = 2
OMEGA = 4
CTRL = 5
ELEC = 9
MECH = ELEC + N_ALPHA * CHAIN_SIZE
CHI = MECH + MECH_SIZE
RR_HAT = CHI + 2
TL_HAT = RR_HAT + 1
W_HAT = TL_HAT + 1
INT_DE2 = W_HAT + 1
INT_DM2 = INT_DE2 + 1
STATE_SIZE = INT_DM2 + 1

MODE_GROUND_TRUTH = 0
MODE_CERTAINTY_EQUIVALENCE = 1

TELEMETRY_COLUMNS = (
    "t",
    "lambda_a", "lambda_b", "i_a", "i_b", "omega", "v_a", "v_b",
    "lambda_hat_a", "lambda_hat_b", "Rr_hat", "TL_hat", "omega_hat",
    "flux_error_norm", "Rr_error", "TL_error", "omega_error",
    "Delta_e", "Delta_m", "int_Delta_e_sq", "int_Delta_m_sq",
    "res_e_1", "res_e_2", "res_e_3", "res_e_4", "res_e_5", "res_e_6",
    "res_mix", "res_mech", "adj_identity",
    "zeta_e1", "zeta_m1", "zeta_m2",
    "observer_active", "mech_active", "flux_floor_hits",
)
N_COLUMNS = len(TELEMETRY_COLUMNS)


class KernelSettings(NamedTuple):
    alphas: np.ndarray
    a: float
    gamma_lambda: float
    gamma_r: float
    gamma_omega: float
    gamma_T: float
    mode: int
    Rr_for_control: float
    flux_floor: float
    # (flux depth, flux rad/s, speed amplitude rad/s, speed rad/s,
    #  injected voltage amplitude V, injection rad/s); zeros = constant references
    modulation: np.ndarray
    # inverter output forced to zero from this time on (inf: never)
    voltage_cutoff: float = math.inf


@njit(cache=True)
def references(t, g, ks):
    m = ks.modulation
    lam_ref = g.lambda_norm_ref * (1.0 + m[0] * math.sin(m[1] * t))
    w_ref = g.omega_ref + m[2] * math.sin(m[3] * t)
    return lam_ref, w_ref


@njit(cache=True)
def augmented_rhs(t, x, p, g, ks, elec_on, obs_on, mech_on, tl_on):
    """Derivative of the full augmented state.

    Returns ``(dx, v, Delta_e, zeta_e, Delta_m, zeta_m, floored)``.  The
    switches freeze subsystems: ``elec_on`` the electrical chains, ``obs_on``
    the flux and resistance estimators, ``mech_on`` the mechanical chain and
    ``tl_on`` the load and speed estimators.
    """
    dx = np.zeros(STATE_SIZE)
    lam = x[LAM:LAM + 2]
    i = x[CUR:CUR + 2]
    omega = x[OMEGA]

    lam_ref, w_ref = references(t, g, ks)
    v, dctrl, floored = foc_tracking(lam, i, omega, x[CTRL:CTRL + 4], g, p,
                                     ks.Rr_for_control, ks.flux_floor, lam_ref, w_ref)
    m = ks.modulation
    if m[4] != 0.0:
        v = v + m[4] * np.array([math.sin(m[5] * t), math.sin(1.7 * m[5] * t)])
    if t >= ks.voltage_cutoff:
        v = np.zeros(2)
        dctrl = np.zeros(4)
    dlam, di, domega = motor_rhs(lam, i, omega, v, p)
    dx[LAM:LAM + 2] = dlam
    dx[CUR:CUR + 2] = di
    dx[OMEGA] = domega
    dx[CTRL:CTRL + 4] = dctrl

    states = x[ELEC:MECH].reshape((N_ALPHA, CHAIN_SIZE))
    zeta_e = np.zeros(N_ALPHA)
    Delta_e = 0.0
    if elec_on:
        for k in range(N_ALPHA):
            dx[ELEC + k * CHAIN_SIZE:ELEC + (k + 1) * CHAIN_SIZE] = chain_derivative(
                states[k], i, v, ks.alphas[k])

    chi = x[CHI:CHI + 2]
    lam_hat = flux_estimate(chi, i, p)
    if obs_on and elec_on:
        # mixing is only needed once something consumes it
        _, _, zeta_e, Delta_e = extend_and_mix(states, i, v, ks.alphas, p)
        dchi, lam_hat = flux_observer_step(chi, i, v, zeta_e[1:3], Delta_e, ks.gamma_lambda, p)
        dx[CHI:CHI + 2] = dchi
        dx[RR_HAT] = rr_estimator_step(x[RR_HAT], zeta_e[0], Delta_e, ks.gamma_r)
        dx[INT_DE2] = Delta_e * Delta_e
    else:
        # hold lam_hat = chi - (sigma Ls / beta) i at its initial value
        dx[CHI:CHI + 2] = (sigma_of(p) * p.Ls / beta_of(p)) * di

    if ks.mode == MODE_GROUND_TRUTH:
        lam_in = lam
        Rr_in = p.Rr_true
    else:
        lam_in = lam_hat
        Rr_in = x[RR_HAT]

    ms = x[MECH:MECH + MECH_SIZE]
    zeta_m = np.zeros(2)
    Delta_m = 0.0
    if mech_on:
        dx[MECH:MECH + MECH_SIZE] = mechanical_derivative(ms, lam_in, Rr_in, i, ks.a, p)
        _, _, zeta_m, Delta_m = mix_mechanical(ms, lam_in, ks.a, p)
    if tl_on:
        dTL, dw = tl_omega_step(zeta_m, Delta_m, lam_in, i, x[TL_HAT], x[W_HAT],
                                ks.gamma_T, ks.gamma_omega, p)
        dx[TL_HAT] = dTL
        dx[W_HAT] = dw
        dx[INT_DM2] = Delta_m * Delta_m
    return dx, v, Delta_e, zeta_e, Delta_m, zeta_m, floored


@njit(cache=True)
def telemetry_row(t, x, p, g, ks, elec_on, obs_on, mech_on, tl_on, floor_hits, row):
    """Fill one telemetry row; ground truth is read here and nowhere upstream."""
    _, v, _, _, Delta_m, zeta_m, _ = augmented_rhs(
        t, x, p, g, ks, elec_on, obs_on, mech_on, tl_on)
    lam = x[LAM:LAM + 2]
    i = x[CUR:CUR + 2]
    omega = x[OMEGA]
    lam_hat = flux_estimate(x[CHI:CHI + 2], i, p)
    Rr = p.Rr_true

    row[0] = t
    row[1:3] = lam
    row[3:5] = i
    row[5] = omega
    row[6:8] = v
    row[8:10] = lam_hat
    row[10] = x[RR_HAT]
    row[11] = x[TL_HAT]
    row[12] = x[W_HAT]
    row[13] = math.sqrt((lam[0] - lam_hat[0]) ** 2 + (lam[1] - lam_hat[1]) ** 2)
    row[14] = x[RR_HAT] - Rr
    row[15] = x[TL_HAT] - p.TL_true
    row[16] = x[W_HAT] - omega
    row[18] = Delta_m
    row[19] = x[INT_DE2]
    row[20] = x[INT_DM2]

    theta = np.array([Rr, lam[0], lam[1], Rr * lam[0], Rr * lam[1], Rr * (lam @ lam)])
    states = x[ELEC:MECH].reshape((N_ALPHA, CHAIN_SIZE))
    Psi, Phi, zeta_e, Delta_e = extend_and_mix(states, i, v, ks.alphas, p)
    if not elec_on:
        zeta_e[:] = 0.0
        Delta_e = 0.0
    row[17] = Delta_e
    for k in range(N_ALPHA):
        row[21 + k] = abs(Psi[k] - Phi[k] @ theta) / (1.0 + abs(Psi[k]))
    r = zeta_e - Delta_e * theta
    row[27] = math.sqrt(r @ r) / (1.0 + math.sqrt(zeta_e @ zeta_e))

    ms = x[MECH:MECH + MECH_SIZE]
    lam_in = lam if ks.mode == MODE_GROUND_TRUTH else lam_hat
    z_m, Phi_m, _, _ = mix_mechanical(ms, lam_in, ks.a, p)
    rm = z_m - Phi_m @ np.array([p.TL_true, omega])
    row[28] = math.sqrt(rm @ rm) / (1.0 + math.sqrt(z_m @ z_m))

    adj, det = adjugate_det(Phi)
    if not elec_on:
        adj[:] = 0.0
        det = 0.0
    E = adj @ Phi
    for d in range(N_ALPHA):
        E[d, d] -= det
    denom = math.sqrt(np.sum(adj * adj)) * math.sqrt(np.sum(Phi * Phi))
    row[29] = math.sqrt(np.sum(E * E)) / denom if denom > 0 else 0.0

    row[30] = zeta_e[0]
    row[31] = zeta_m[0]
    row[32] = zeta_m[1]
    row[33] = 1.0 if obs_on else 0.0
    row[34] = 1.0 if mech_on else 0.0
    row[35] = floor_hits


@njit(cache=True)
def integrate(x0, p, g, ks, dt, n_steps, log_every, elec_step, enable_step, ce_gate):
    """Run ``n_steps`` RK4 steps from ``x0``.

    Returns ``(log, n_rows, status, x_final)`` where ``status`` is 0 on
    success or ``k + 1`` when the state became non-finite during step ``k``.
    In ground-truth mode the mechanical chain runs alongside the electrical
    chains; in certainty-equivalence mode it latches on once the observers
    are enabled and the integral of Delta_e^2 exceeds ``ce_gate``.
    """
    n_rows_max = n_steps // log_every + 1
    log = np.full((n_rows_max, N_COLUMNS), np.nan)
    x = x0.copy()
    n_rows = 0
    floor_hits = 0
    mech_latched = False
    for k in range(n_steps + 1):
        t = k * dt
        elec_on = k >= elec_step
        obs_on = k >= enable_step
        if ks.mode == MODE_GROUND_TRUTH:
            mech_on = elec_on
            tl_on = obs_on
        else:
            if obs_on and not mech_latched and x[INT_DE2] >= ce_gate:
                mech_latched = True
            mech_on = mech_latched
            tl_on = mech_latched
        if k % log_every == 0:
            telemetry_row(t, x, p, g, ks, elec_on, obs_on, mech_on, tl_on, floor_hits,
                          log[n_rows])
            n_rows += 1
        if k == n_steps:
            break
        h = 0.5 * dt
        k1, _, _, _, _, _, f1 = augmented_rhs(t, x, p, g, ks, elec_on, obs_on, mech_on, tl_on)
        k2, _, _, _, _, _, f2 = augmented_rhs(t + h, x + h * k1, p, g, ks,
                                              elec_on, obs_on, mech_on, tl_on)
        k3, _, _, _, _, _, f3 = augmented_rhs(t + h, x + h * k2, p, g, ks,
                                              elec_on, obs_on, mech_on, tl_on)
        k4, _, _, _, _, _, f4 = augmented_rhs(t + dt, x + dt * k3, p, g, ks,
                                              elec_on, obs_on, mech_on, tl_on)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        floor_hits += int(f1) + int(f2) + int(f3) + int(f4)
        if not np.all(np.isfinite(x)):
            return log, n_rows, k + 1, x
    return log, n_rows, 0, x


def initial_state(lambda0=(0.02, 0.0), i0=(0.0, 0.0), omega0=0.0, chi0=None,
                  Rr_hat0=0.0, TL_hat0=0.0, omega_hat0=0.0, filter_ic=0.0,
                  sigma_Ls_over_beta=None) -> np.ndarray:
    """Assemble the augmented initial state.

    ``chi0`` defaults to the value making the initial flux estimate zero.
    ``filter_ic`` sets every regression filter state to a constant, to
    exercise the decaying terms caused by nonzero initial conditions.
    """
    x = np.zeros(STATE_SIZE)
    x[LAM:LAM + 2] = lambda0
    x[CUR:CUR + 2] = i0
    x[OMEGA] = omega0
    x[ELEC:CHI] = filter_ic
    if chi0 is None:
        k = 0.0 if sigma_Ls_over_beta is None else sigma_Ls_over_beta
        chi0 = k * np.asarray(i0, dtype=float)
    x[CHI:CHI + 2] = chi0
    x[RR_HAT] = Rr_hat0
    x[TL_HAT] = TL_hat0
    x[W_HAT] = omega_hat0
    return x
