"""State-space realizations of the first-order LTI filters used by the estimators.

Every filter is strictly proper in its state, so no input is ever
differentiated: the derivative-lowpass ``alpha p/(p+alpha)`` and the washout
``p/(p+alpha)`` are read off the same state that realizes the lowpass or lag.
The kernels work on floats and on numpy arrays alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .motor import step_rk4


@njit(cache=True)
def lowpass_derivative(u, x, alpha):
    """Return ``(alpha/(p+alpha)[u], alpha p/(p+alpha)[u], dx)``."""
    dx = alpha * (u - x)
    return x, dx, dx


@njit(cache=True)
def pure_lag(u, x, alpha):
    """Return ``(1/(p+alpha)[u], dx)``."""
    return x, u - alpha * x


@njit(cache=True)
def washout(u, x, alpha):
    """Return ``(p/(p+alpha)[u], dx)`` where ``x`` is the lag state 1/(p+alpha)[u]."""
    dx = u - alpha * x
    return dx, dx


KINDS = ("lowpass", "derivative-lowpass", "pure-lag", "washout")


@dataclass
class FirstOrderFilter:
    """A single stable pole with its own state, for standalone use and tests.

    ``lowpass`` and ``derivative-lowpass`` share the realization
    x' = pole (u - x); ``pure-lag`` and ``washout`` share x' = u - pole x.
    """

    pole: float
    kind: str = "lowpass"
    state: np.ndarray | float = 0.0

    def __post_init__(self):
        if not self.pole > 0:
            raise ValueError(f"filter pole must be positive, got {self.pole}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")

    def rhs(self, u, x):
        """Output and state derivative for input ``u`` at state ``x``."""
        if self.kind == "lowpass":
            y, _, dx = lowpass_derivative(u, x, self.pole)
        elif self.kind == "derivative-lowpass":
            _, y, dx = lowpass_derivative(u, x, self.pole)
        elif self.kind == "pure-lag":
            y, dx = pure_lag(u, x, self.pole)
        else:
            y, dx = washout(u, x, self.pole)
        return y, dx


@dataclass
class FilterChain:
    """Cascade of first-order stages; stage k feeds stage k+1."""

    stages: list[FirstOrderFilter] = field(default_factory=list)

    def rhs(self, u, states):
        y = u
        dstates = []
        for stage, x in zip(self.stages, states):
            y, dx = stage.rhs(y, x)
            dstates.append(dx)
        return y, dstates

    def simulate(self, u_fn, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Drive the cascade with ``u_fn(t)`` using RK4; returns (t, y)."""
        n = len(self.stages)
        x0 = np.array([np.asarray(s.state, dtype=float) for s in self.stages], dtype=float)

        def f(t, x):
            _, dx = self.rhs(u_fn(t), list(x))
            return np.array(dx, dtype=float)

        steps = int(round(t_end / dt))
        ts = np.arange(steps + 1) * dt
        ys = np.empty(steps + 1)
        x = x0
        for k in range(steps + 1):
            ys[k] = self.rhs(u_fn(ts[k]), list(x))[0]
            if k < steps:
                x = step_rk4(x, f, dt, ts[k])
        for stage, xs in zip(self.stages, x[:n]):
            stage.state = xs
        return ts, ys
