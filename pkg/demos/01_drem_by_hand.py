"""Regressor extension and mixing on a toy problem.

Three unknowns, one scalar measurement y(t) = phi(t)^T theta.  A single
equation cannot be inverted, but passing it through three different
first-order filters gives a square system whose adjugate decouples it
into three scalar equations sharing one determinant.
"""
import numpy as np

from dremobs.drem import mix
from dremobs.motor import step_rk4

theta = np.array([1.5, -0.4, 2.0])
poles = np.array([2.0, 5.0, 11.0])


def phi(t):
    return np.array([1.0, np.sin(3 * t), np.cos(0.7 * t)])


# state: for each pole, filtered phi (3) and filtered y (1)
def rhs(t, x):
    f = phi(t)
    y = f @ theta
    dx = np.empty(12)
    for k, a in enumerate(poles):
        block = x[4 * k:4 * k + 4]
        dx[4 * k:4 * k + 3] = a * (f - block[:3])
        dx[4 * k + 3] = a * (y - block[3])
    return dx


x = np.zeros(12)
dt = 1e-3
for n in range(3000):
    x = step_rk4(x, rhs, dt, n * dt)
    if (n + 1) % 500 == 0:
        Phi = x.reshape(3, 4)[:, :3]
        Y = x.reshape(3, 4)[:, 3]
        zeta, delta = mix(Phi, Y)
        # zeta_k = delta * theta_k; dividing is only for display
        print(f"t={(n + 1) * dt:4.1f}  Delta={delta: .3e}  zeta/Delta={np.round(zeta / delta, 9)}")

print("true theta", theta)
