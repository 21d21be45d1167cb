"""Mechanical regression for the load torque and the rotor speed.

Given the flux and rotor resistance (true values or estimates) and the
measured current, a bank of ``a/(p+a)`` filters yields

    z_m = Phi_m (TL, omega) + eps_t

which is mixed into two scalar regressions sharing Delta_m = det(Phi_m).

State layout (10 entries)::

    0:2  a/(p+a)[lam]
    2:4  a/(p+a)[eta1],            eta1 = (Rr/Lr) lam - Rr beta i
    4:6  a/(p+a)[eta2],            eta2 = n_p J lam
    6:8  1/(p+a)[a/(p+a)[eta2]]    = a/(p+a)^2 [eta2]
    8:10 1/(p+a)[(eta2.i) a/(p+a)[eta2]]
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .drem import mix
from .filters import lowpass_derivative, pure_lag
from .motor import beta_of, skew

MECH_SIZE = 10


@njit(cache=True)
def eta_signals(lam, Rr, i, p):
    beta = beta_of(p)
    eta1 = (Rr / p.Lr) * lam - Rr * beta * i
    eta2 = p.n_p * skew(lam)
    return eta1, eta2


@njit(cache=True)
def mechanical_derivative(s, lam, Rr, i, a, p):
    eta1, eta2 = eta_signals(lam, Rr, i, p)
    x3 = s[4:6]
    ds = np.empty(MECH_SIZE)
    ds[0:2] = lowpass_derivative(lam, s[0:2], a)[2]
    ds[2:4] = lowpass_derivative(eta1, s[2:4], a)[2]
    ds[4:6] = lowpass_derivative(eta2, x3, a)[2]
    ds[6:8] = pure_lag(x3, s[6:8], a)[1]
    ds[8:10] = pure_lag((eta2 @ i) * x3, s[8:10], a)[1]
    return ds


@njit(cache=True)
def mechanical_regression(s, lam, a, p):
    """Return ``(z_m, Phi_m)``; the derivative filter is a (lam - a/(p+a)[lam])."""
    beta = beta_of(p)
    z = a * (lam - s[0:2]) + s[2:4] + (beta / p.J) * s[8:10]
    Phi = np.empty((2, 2))
    Phi[:, 0] = s[6:8] / p.J
    Phi[:, 1] = s[4:6]
    return z, Phi


@njit(cache=True)
def mix_mechanical(s, lam, a, p):
    """Return ``(z_m, Phi_m, zeta_m, Delta_m)``; zeta_m[0] pairs with TL, zeta_m[1] with omega."""
    z, Phi = mechanical_regression(s, lam, a, p)
    zeta, delta = mix(Phi, z)
    return z, Phi, zeta, delta


def electrical_frequency(omega_star: float, lambda_norm_star: float, Rr: float, TL: float,
                         n_p: int = 1) -> float:
    """Steady-state rotation rate of the flux vector (rad/s)."""
    if not lambda_norm_star > 0:
        raise ValueError("flux norm must be positive")
    return n_p * omega_star + Rr * TL / (n_p * lambda_norm_star**2)


def steady_state_delta(omega_star: float, lambda_norm_star: float, Rr: float, TL: float,
                       a: float, J: float, n_p: int = 1) -> float:
    """Predicted constant value of Delta_m when the flux rotates uniformly.

    Both columns of Phi_m are filtered copies of n_p J lam; the first lags the
    second by psi = arctan(varpi/a) and is smaller by 1/(J sqrt(varpi^2+a^2)).
    """
    varpi = electrical_frequency(omega_star, lambda_norm_star, Rr, TL, n_p)
    mag2 = a * a / (varpi * varpi + a * a)
    psi = math.atan2(varpi, a)
    return ((n_p * lambda_norm_star) ** 2 / J * mag2
            / math.sqrt(varpi * varpi + a * a) * math.sin(psi))


def unscaled_steady_state_delta(omega_star: float, lambda_norm_star: float, Rr: float,
                                TL: float, a: float, J: float) -> float:
    """The closed form -(|lam*|/J) sin(psi), kept only for side-by-side reporting."""
    varpi = electrical_frequency(omega_star, lambda_norm_star, Rr, TL)
    return -(lambda_norm_star / J) * math.sin(math.atan2(varpi, a))
