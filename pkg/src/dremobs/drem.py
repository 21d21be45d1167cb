"""Adjugate/determinant pair and the DREM mixing step for small square matrices.

Two singularity-safe routes are provided.  :func:`adjugate_det` goes through
the singular value decomposition, adj(A) = det(U) det(V) V diag(prod_{j!=i}
s_j) U^T, which never divides by the determinant and keeps
adj(A) A = det(A) I to rounding even when A is numerically rank deficient.
The decomposition is a one-sided Jacobi sweep, which is cheap at these sizes
and resolves tiny singular values to high relative accuracy.
:func:`adjugate_det_faddeev` is the Faddeev-LeVerrier recursion; it is exact
in exact arithmetic but loses all accuracy on the nearly singular stacked
regressors met in practice, so the simulation uses the SVD route.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _faddeev_leverrier(A):
    n = A.shape[0]
    Mk = np.zeros((n, n))
    c = 1.0
    for k in range(1, n + 1):
        Mk = A @ Mk
        for d in range(n):
            Mk[d, d] += c
        AM = A @ Mk
        c = -np.trace(AM) / k
    # after the loop Mk = M_n and c = c_0
    sign = 1.0 if n % 2 == 0 else -1.0
    return -sign * Mk, sign * c


@njit(cache=True)
def _row_scales(A):
    n = A.shape[0]
    s = np.ones(n)
    for r in range(n):
        m = np.max(np.abs(A[r]))
        if m > 0.0:
            s[r] = 1.0 / m
    return s


@njit(cache=True)
def _check(A):
    if A.ndim != 2 or A.shape[1] != A.shape[0]:
        raise ValueError("adjugate_det: matrix must be square")
    if not np.all(np.isfinite(A)):
        raise FloatingPointError("adjugate_det: non-finite entries")


@njit(cache=True)
def _unscale(adj_s, det_s, s):
    # A = S^-1 As  =>  det A = det As / prod(s),  adj A = adj As S / prod(s)
    n = s.shape[0]
    scale = 1.0
    for r in range(n):
        scale /= s[r]
    adj = adj_s * scale
    for col in range(n):
        adj[:, col] *= s[col]
    return adj, det_s * scale


@njit(cache=True)
def _det_sign(Q):
    # sign of det for a well-conditioned matrix: LU with partial pivoting
    n = Q.shape[0]
    W = Q.copy()
    sign = 1.0
    for c in range(n):
        piv = c
        for r in range(c + 1, n):
            if abs(W[r, c]) > abs(W[piv, c]):
                piv = r
        if W[piv, c] == 0.0:
            return 0.0
        if piv != c:
            for k in range(n):
                W[c, k], W[piv, k] = W[piv, k], W[c, k]
            sign = -sign
        if W[c, c] < 0.0:
            sign = -sign
        for r in range(c + 1, n):
            f = W[r, c] / W[c, c]
            for k in range(c, n):
                W[r, k] -= f * W[c, k]
    return sign


@njit(cache=True)
def jacobi_svd(A, max_sweeps=60):
    """One-sided Jacobi SVD of a square matrix: ``(U, s, V)`` with A = U diag(s) V^T.

    ``V`` is a product of plane rotations, so det(V) = +1.  Columns of ``U``
    belonging to exactly zero singular values are completed to an orthonormal
    basis.  Singular values are not sorted.
    """
    n = A.shape[0]
    W = A.copy()
    V = np.eye(n)
    eps = 2.220446049250313e-16
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                a = 0.0
                b = 0.0
                g = 0.0
                for r in range(n):
                    a += W[r, p] * W[r, p]
                    b += W[r, q] * W[r, q]
                    g += W[r, p] * W[r, q]
                if g == 0.0 or abs(g) <= eps * math.sqrt(a * b):
                    continue
                rotated = True
                zeta = (b - a) / (2.0 * g)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                sn = c * t
                for r in range(n):
                    wp = W[r, p]
                    wq = W[r, q]
                    W[r, p] = c * wp - sn * wq
                    W[r, q] = sn * wp + c * wq
                    vp = V[r, p]
                    vq = V[r, q]
                    V[r, p] = c * vp - sn * vq
                    V[r, q] = sn * vp + c * vq
        if not rotated:
            break
    s = np.empty(n)
    U = np.zeros((n, n))
    for k in range(n):
        s[k] = math.sqrt(np.sum(W[:, k] * W[:, k]))
        if s[k] > 0.0:
            U[:, k] = W[:, k] / s[k]
    # complete the basis where the column vanished (Gram-Schmidt on unit vectors)
    for k in range(n):
        if s[k] > 0.0:
            continue
        for e in range(n):
            u = np.zeros(n)
            u[e] = 1.0
            for j in range(n):
                if j != k and (s[j] > 0.0 or j < k):
                    proj = 0.0
                    for r in range(n):
                        proj += U[r, j] * u[r]
                    for r in range(n):
                        u[r] -= proj * U[r, j]
            nu = math.sqrt(u @ u)
            if nu > 0.5:
                U[:, k] = u / nu
                break
    return U, s, V


@njit(cache=True)
def adjugate_det(A):
    """Adjugate and determinant in one pass (rows pre-scaled, SVD route).

    Singular input is legitimate and yields ``det == 0`` with a well-defined
    adjugate.
    """
    _check(A)
    n = A.shape[0]
    if n == 2:
        adj2 = np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])
        return adj2, A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    s = _row_scales(A)
    As = A * s.reshape((n, 1))
    U, sv, V = jacobi_svd(As)
    sign = _det_sign(U)
    prods = np.empty(n)
    for i in range(n):
        acc = 1.0
        for j in range(n):
            if j != i:
                acc *= sv[j]
        prods[i] = acc
    det_s = sign * prods[0] * sv[0] if n > 0 else 1.0
    adj_s = sign * (V * prods.reshape((1, n))) @ U.T
    return _unscale(adj_s, det_s, s)


@njit(cache=True)
def adjugate_det_faddeev(A):
    """Adjugate and determinant by the Faddeev-LeVerrier recursion, rows pre-scaled."""
    _check(A)
    n = A.shape[0]
    s = _row_scales(A)
    adj_s, det_s = _faddeev_leverrier(A * s.reshape((n, 1)))
    return _unscale(adj_s, det_s, s)


@njit(cache=True)
def mix(A, y):
    """DREM mixing: ``zeta = adj(A) y`` and ``delta = det(A)``.

    If ``y = A theta`` then ``zeta = delta * theta`` element by element.
    """
    if y.shape[0] != A.shape[0]:
        raise ValueError("mix: dimension mismatch")
    adj, det = adjugate_det(A)
    return adj @ np.ascontiguousarray(y), det
