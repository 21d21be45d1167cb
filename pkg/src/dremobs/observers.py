"""Gradient estimation laws driven by the mixed scalar regressions, and
excitation diagnostics for the mixing determinants."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .motor import beta_of, sigma_of


@njit(cache=True)
def flux_estimate(chi, i, p):
    """lam_hat = -(sigma Ls / beta) i + chi."""
    return chi - (sigma_of(p) * p.Ls / beta_of(p)) * i


@njit(cache=True)
def flux_observer_step(chi, i, v, zeta_e23, Delta_e, gamma_lambda, p):
    """Derivative of the flux observer state and the current flux estimate."""
    beta = beta_of(p)
    lam_hat = flux_estimate(chi, i, p)
    dchi = v / beta - (p.Rs / beta) * i + gamma_lambda * Delta_e * (zeta_e23 - lam_hat * Delta_e)
    return dchi, lam_hat


@njit(cache=True)
def rr_estimator_step(Rr_hat, zeta_e1, Delta_e, gamma_r):
    return gamma_r * Delta_e * (zeta_e1 - Rr_hat * Delta_e)


@njit(cache=True)
def tl_omega_step(zeta_m, Delta_m, lam, i, TL_hat, omega_hat, gamma_T, gamma_omega, p):
    """Derivatives ``(dTL_hat, domega_hat)``.

    The speed observer copies the mechanical equation with the estimated load
    and corrects it along the second mixed regression.
    """
    beta = beta_of(p)
    dTL = gamma_T * Delta_m * (zeta_m[0] - TL_hat * Delta_m)
    torque = lam[1] * i[0] - lam[0] * i[1]  # lam^T J i
    domega = (-TL_hat / p.J - p.n_p * beta / p.J * torque
              + gamma_omega * Delta_m * (zeta_m[1] - omega_hat * Delta_m))
    return dTL, domega


INSUFFICIENT = "insufficient"
NON_L2 = "non-L2-trending"
PE_LIKE = "PE-like"


def classify_excitation(t: np.ndarray, integral: np.ndarray, window: float,
                        floor: float = 0.0, tail_ratio: float = 0.05,
                        pe_ratio: float = 0.1) -> tuple[str, float]:
    """Classify a running integral of Delta^2 sampled at times ``t``.

    The tail rate is the growth over the last window; the PE proxy is the
    smallest growth over any window.  Both are compared with the mean rate,
    which makes the labels independent of the (often tiny) scale of Delta.
    Returns ``(label, window_min)``.
    """
    t = np.asarray(t, dtype=float)
    integral = np.asarray(integral, dtype=float)
    span = t[-1] - t[0]
    total = integral[-1] - integral[0]
    if span <= 0 or total <= floor or span < window:
        return INSUFFICIENT, 0.0
    lagged = np.interp(t - window, t, integral)
    ok = t - window >= t[0] - 1e-12
    increments = (integral - lagged)[ok]
    window_min = float(increments.min())
    mean_rate = total / span
    tail_rate = increments[-1] / window
    if tail_rate < tail_ratio * mean_rate:
        return INSUFFICIENT, window_min
    if window_min / window >= pe_ratio * mean_rate:
        return PE_LIKE, window_min
    return NON_L2, window_min


@dataclass
class ExcitationMonitor:
    """Streaming accumulator of the integral of Delta^2 (trapezoidal rule).

    Purely diagnostic; nothing here feeds back into estimation.
    """

    window: float = 1.0
    integral_delta_sq: float = 0.0
    t: float = 0.0
    _last_sq: float | None = None
    _history: deque = field(default_factory=deque)

    def update(self, delta: float, dt: float) -> str:
        sq = float(delta) ** 2
        if self._last_sq is None:
            self._history.append((self.t, 0.0))
        else:
            self.integral_delta_sq += 0.5 * dt * (self._last_sq + sq)
            self.t += dt
            self._history.append((self.t, self.integral_delta_sq))
        self._last_sq = sq
        return self.classification

    @property
    def window_min(self) -> float:
        return self._classify()[1]

    @property
    def classification(self) -> str:
        return self._classify()[0]

    def _classify(self):
        if len(self._history) < 2:
            return INSUFFICIENT, 0.0
        t, integral = np.array(self._history).T
        return classify_excitation(t, integral, self.window)
