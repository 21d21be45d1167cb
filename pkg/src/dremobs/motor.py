"""Fixed-frame induction motor, full-state field-oriented controller and RK4.

Vectors are length-2 numpy arrays in the stationary (a, b) frame.  The
functions decorated with ``njit`` are called from inside the compiled
simulation kernel but remain ordinary callables from Python.
"""
from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from numba import njit


class IntegrationFault(RuntimeError):
    """Raised when the integrated state stops being finite."""

    def __init__(self, t: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={t:.6g} s")
        self.t = t


class MotorParams(NamedTuple):
    """Physical constants of the machine.

    ``beta`` and ``sigma`` are derived on demand with :func:`beta_of` and
    :func:`sigma_of`; they are never stored.
    """

    Ls: float = 0.14
    Lr: float = 0.14
    M: float = 0.117
    Rs: float = 1.7
    Rr_true: float = 3.9
    J: float = 1.1e-4
    n_p: int = 1
    TL_true: float = 0.05

    @property
    def beta(self) -> float:
        return self.M / self.Lr

    @property
    def sigma(self) -> float:
        return 1.0 - self.M**2 / (self.Ls * self.Lr)

    def validate(self) -> list[str]:
        errors = []
        for name in ("Ls", "Lr", "M", "Rs", "Rr_true", "J"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                errors.append(f"motor.{name} must be a positive finite number, got {value!r}")
        if int(self.n_p) != self.n_p or self.n_p < 1:
            errors.append(f"motor.n_p must be a positive integer, got {self.n_p!r}")
        if not errors and not 0.0 < self.sigma < 1.0:
            errors.append(f"leakage sigma = 1 - M^2/(Ls Lr) must lie in (0, 1), got {self.sigma:.6g}")
        if not math.isfinite(self.TL_true):
            errors.append("motor.TL_true must be finite")
        return errors


class ControllerGains(NamedTuple):
    """PI gains and the constant references of the flux and speed loops."""

    Kp: float = 100.0
    Ki: float = 100.0
    Klp: float = 10.0
    Kli: float = 100.0
    Kwp: float = 10.0
    Kwi: float = 10.0
    lambda_norm_ref: float = 0.0455
    omega_ref: float = 40.0

    def validate(self) -> list[str]:
        errors = []
        for name in ("Kp", "Ki", "Klp", "Kli", "Kwp", "Kwi"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                errors.append(f"controller.{name} must be > 0, got {value!r}")
        for name in ("lambda_norm_ref", "omega_ref"):
            if not math.isfinite(getattr(self, name)):
                errors.append(f"controller.{name} must be finite")
        return errors


@njit(cache=True)
def beta_of(p):
    return p.M / p.Lr


@njit(cache=True)
def sigma_of(p):
    return 1.0 - p.M * p.M / (p.Ls * p.Lr)


@njit(cache=True)
def skew(x):
    """Apply the 90 degree rotation [[0, -1], [1, 0]] to a 2-vector."""
    return np.array([-x[1], x[0]])


@njit(cache=True)
def rotation(delta):
    """Matrix exponential exp(J*delta) of the skew generator."""
    c = math.cos(delta)
    s = math.sin(delta)
    return np.array([[c, -s], [s, c]])


@njit(cache=True)
def motor_derivative(lam, i, omega, v, p):
    """Right-hand side of the flux, current and speed equations.

    Returns ``(dlam, di, domega)``; the current equation is divided through
    by ``Ls*sigma``.
    """
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(i))
            and np.all(np.isfinite(v)) and math.isfinite(omega)):
        raise FloatingPointError("motor_derivative: non-finite input")
    return motor_rhs(lam, i, omega, v, p)


@njit(cache=True)
def motor_rhs(lam, i, omega, v, p):
    # unchecked variant for the simulation kernel, which validates whole steps
    beta = beta_of(p)
    sigma = sigma_of(p)
    a = p.Rr_true / p.Lr
    w = p.n_p * omega
    # (Rr/Lr I - n_p J omega) lam
    k_lam = np.array([a * lam[0] + w * lam[1], a * lam[1] - w * lam[0]])
    dlam = -k_lam + p.Rr_true * beta * i
    di = (-(p.Rs + p.Rr_true * beta * beta) * i + beta * k_lam + v) / (p.Ls * sigma)
    torque = lam[1] * i[0] - lam[0] * i[1]  # lam^T J i
    domega = (-p.n_p * beta * torque - p.TL_true) / p.J
    return dlam, di, domega


@njit(cache=True)
def foc_control(lam, i, omega, ctrl, g, p, Rr_for_control, flux_floor):
    """Full-state field-oriented PI controller.

    ``ctrl`` holds (int_id, int_iq, int_e_lambda, int_e_omega).  Returns the
    fixed-frame voltage, the integrator derivatives and a flag telling
    whether the flux floor was applied.
    """
    return foc_tracking(lam, i, omega, ctrl, g, p, Rr_for_control, flux_floor,
                        g.lambda_norm_ref, g.omega_ref)


@njit(cache=True)
def foc_tracking(lam, i, omega, ctrl, g, p, Rr_for_control, flux_floor, lambda_ref, omega_ref):
    """:func:`foc_control` with explicit, possibly time-varying, references."""
    norm = math.sqrt(lam[0] * lam[0] + lam[1] * lam[1])
    floored = norm < flux_floor
    if floored:
        norm = flux_floor
    delta = math.atan2(lam[1], lam[0])
    c = math.cos(delta)
    s = math.sin(delta)
    # exp(-J delta) i
    id_ = c * i[0] + s * i[1]
    iq = -s * i[0] + c * i[1]

    e_lam = lambda_ref - norm
    e_w = omega_ref - omega
    id_ref = norm / p.M + p.Lr / (Rr_for_control * p.M) * (g.Klp * e_lam + g.Kli * ctrl[2])
    iq_ref = p.J * p.Lr / (p.M * norm) * (g.Kwp * e_w + g.Kwi * ctrl[3])

    ed = id_ref - id_
    eq = iq_ref - iq
    vd = g.Kp * ed + g.Ki * ctrl[0]
    vq = g.Kp * eq + g.Ki * ctrl[1]
    v = np.array([c * vd - s * vq, s * vd + c * vq])
    dctrl = np.array([ed, eq, e_lam, e_w])
    return v, dctrl, floored


def step_rk4(x: np.ndarray, derivative_fn: Callable[[float, np.ndarray], np.ndarray],
             dt: float, t: float = 0.0) -> np.ndarray:
    """One classical Runge-Kutta step of ``x' = derivative_fn(t, x)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = derivative_fn(t, x)
    k2 = derivative_fn(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = derivative_fn(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = derivative_fn(t + dt, x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationFault(t + dt)
    return out
