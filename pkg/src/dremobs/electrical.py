"""Electrical linear regression built from measured stator current and voltage.

For each filter constant ``alpha`` a chain of 11 filter states produces the
measurable signals rho1, rho2, rho3 and from them a scalar regression

    z(t, alpha) = phi_e(t, alpha)^T Theta(t) + eps_t,
    Theta = (Rr, lam, Rr*lam, Rr*|lam|^2).

Six chains with distinct constants are stacked into a 6x6 system and mixed
with the adjugate.  Only the known constants Ls, Lr, M (through beta), Rs
and sigma enter here; neither the rotor resistance nor the load is read.

Chain state layout::

    0:2  f_i = alpha/(p+alpha)[i]
    2:4  f_v = alpha/(p+alpha)[v]
    4    1/(p+alpha)[v.f_v]
    5    1/(p+alpha)[i.f_v + v.f_i]
    6    1/(p+alpha)[v.df_i - df_v.df_i/alpha]
    7    1/(p+alpha)[i.f_i]
    8    1/(p+alpha)[i.df_i]
    9    1/(p+alpha)[|df_i|^2]      (also the washout state)
    10   1/(p+alpha)[v.f_i]

with df_i = alpha p/(p+alpha)[i] and df_v likewise.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .drem import mix
from .filters import lowpass_derivative, washout
from .motor import beta_of, sigma_of, step_rk4

CHAIN_SIZE = 11
N_ALPHA = 6
DEFAULT_ALPHAS = (10.0, 20.0, 30.0, 40.0, 50.0, 100.0)


@njit(cache=True)
def chain_derivative(s, i, v, alpha):
    """State derivative of one chain driven by the measurements (i, v)."""
    # written out in scalars: this runs six times per right-hand-side call
    i0, i1 = i[0], i[1]
    v0, v1 = v[0], v[1]
    fi0, fi1 = s[0], s[1]
    fv0, fv1 = s[2], s[3]
    dfi0 = alpha * (i0 - fi0)
    dfi1 = alpha * (i1 - fi1)
    dfv0 = alpha * (v0 - fv0)
    dfv1 = alpha * (v1 - fv1)
    ds = np.empty(CHAIN_SIZE)
    ds[0] = dfi0
    ds[1] = dfi1
    ds[2] = dfv0
    ds[3] = dfv1
    ds[4] = v0 * fv0 + v1 * fv1 - alpha * s[4]
    ds[5] = i0 * fv0 + i1 * fv1 + v0 * fi0 + v1 * fi1 - alpha * s[5]
    ds[6] = v0 * dfi0 + v1 * dfi1 - (dfv0 * dfi0 + dfv1 * dfi1) / alpha - alpha * s[6]
    ds[7] = i0 * fi0 + i1 * fi1 - alpha * s[7]
    ds[8] = i0 * dfi0 + i1 * dfi1 - alpha * s[8]
    ds[9] = dfi0 * dfi0 + dfi1 * dfi1 - alpha * s[9]
    ds[10] = v0 * fi0 + v1 * fi1 - alpha * s[10]
    return ds


@njit(cache=True)
def chain_signals(s, i, v, alpha, p):
    """Return ``(rho1, rho2, rho3, f_i)`` for one chain at the current instant."""
    beta = beta_of(p)
    sigma = sigma_of(p)
    Ls = p.Ls
    Rs = p.Rs
    b2 = beta * beta
    f_i, df_i, _ = lowpass_derivative(i, s[0:2], alpha)
    f_v = s[2:4]
    dfi2 = df_i @ df_i
    wash_dfi2 = washout(dfi2, s[9], alpha)[0]
    fi_dfi = f_i @ df_i

    rho1 = (2.0 / beta) * (-Rs * f_i - sigma * Ls * df_i + f_v)
    mu1 = (2.0 / b2) * s[5]
    mu2 = (2.0 * Ls / (alpha * b2)) * (f_v @ df_i) + (2.0 * Ls / b2) * s[6]
    mu3 = -(2.0 / b2) * s[7]
    mu4 = -(2.0 * Ls / b2) * s[8] + (2.0 * Ls / (alpha * b2)) * (-fi_dfi + s[9])
    mu5 = (2.0 * Ls * Ls / (alpha * b2)) * (-dfi2 + 0.5 * wash_dfi2)
    rho2 = (-(2.0 / b2) * s[4] + Rs * mu1 + sigma * mu2 + Rs * Rs * mu3
            + Rs * sigma * mu4 + sigma * sigma * mu5)
    rho3 = ((Rs / beta) * s[7] - (1.0 / beta) * s[10]
            + (Ls * sigma / (alpha * beta)) * (fi_dfi - s[9]))
    return rho1, rho2, rho3, f_i


@njit(cache=True)
def assemble_phi_z(s, i, v, alpha, p):
    """Scalar regression ``(z, phi_e)`` of one chain."""
    rho1, rho2, rho3, f_i = chain_signals(s, i, v, alpha, p)
    beta = beta_of(p)
    phi = np.empty(6)
    phi[0] = 2.0 / (alpha * p.Lr) * rho2 + 2.0 * beta * rho3
    phi[1:3] = -rho1
    phi[3:5] = 2.0 / (alpha * p.Lr) * rho1 + 2.0 * beta * f_i
    phi[5] = -2.0 / p.Lr
    return rho2, phi


@njit(cache=True)
def stack_regression(states, i, v, alphas, p):
    """Pile the six scalar regressions into ``(Psi, Phi)``."""
    n = alphas.shape[0]
    Psi = np.empty(n)
    Phi = np.empty((n, 6))
    for k in range(n):
        z, phi = assemble_phi_z(states[k], i, v, alphas[k], p)
        Psi[k] = z
        Phi[k] = phi
    return Psi, Phi


@njit(cache=True)
def extend_and_mix(states, i, v, alphas, p):
    """Return ``(Psi, Phi, zeta_e, Delta_e)`` with zeta_e = adj(Phi) Psi."""
    Psi, Phi = stack_regression(states, i, v, alphas, p)
    zeta, delta = mix(Phi, Psi)
    return Psi, Phi, zeta, delta


def theta_electrical(lam: np.ndarray, Rr: float) -> np.ndarray:
    """The 6-vector (Rr, lam, Rr lam, Rr |lam|^2) for ground-truth checks."""
    lam = np.asarray(lam, dtype=float)
    return np.array([Rr, lam[0], lam[1], Rr * lam[0], Rr * lam[1], Rr * (lam @ lam)])


def check_alphas(alphas) -> list[str]:
    alphas = [float(a) for a in alphas]
    errors = []
    if len(alphas) != N_ALPHA:
        errors.append(f"expected {N_ALPHA} filter constants, got {len(alphas)}")
    if any(not a > 0 for a in alphas):
        errors.append("filter constants must be positive")
    if len(set(alphas)) != len(alphas):
        errors.append(f"filter constants must be distinct, got {alphas}")
    return errors


def advance_chain(s: np.ndarray, meas_fn, alpha: float, t: float, dt: float) -> np.ndarray:
    """One RK4 step of a single chain driven open-loop by ``meas_fn(t) -> (i, v)``."""

    def f(tt, x):
        i, v = meas_fn(tt)
        return chain_derivative(x, np.asarray(i, float), np.asarray(v, float), alpha)

    return step_rk4(np.asarray(s, dtype=float), f, dt, t)
