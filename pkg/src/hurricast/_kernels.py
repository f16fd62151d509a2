"""Compiled inner loops for the two hot spots of a backtest.

Both kernels are plain loops over short arrays, where numpy's per-call
overhead dominates; numba compiles them once and caches the machine code.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def ingarch_path(omega, alpha, gamma, xb, y, m0, floor):
    """Floored INGARCH mean recursion; pre-sample Y and M equal ``m0``."""
    n = y.size
    p = alpha.size
    q = gamma.size
    M = np.empty(n)
    for t in range(n):
        m = omega + xb[t]
        for i in range(1, p + 1):
            m += alpha[i - 1] * (y[t - i] if t - i >= 0 else m0)
        for j in range(1, q + 1):
            m += gamma[j - 1] * (M[t - j] if t - j >= 0 else m0)
        M[t] = m if m > floor else floor
    return M


@njit(cache=True)
def _sorted_leaf_loss(v, tau):
    n = v.size
    k = int(np.ceil(tau * n - 1e-12)) - 1
    if k < 0:
        k = 0
    q = v[k]
    s = 0.0
    for i in range(n):
        u = v[i] - q
        s += tau * u if u >= 0 else (tau - 1.0) * u
    return s


@njit(cache=True)
def split_losses(xs, rs, tau, min_leaf):
    """Loss of every admissible split of rows sorted by ``xs``.

    Entry ``i`` is the summed leaf pinball loss when the first ``i`` rows go
    left; inadmissible positions (ties in ``xs`` or a leaf below
    ``min_leaf``) are +inf.
    """
    m = xs.size
    out = np.full(m, np.inf)
    for i in range(min_leaf, m - min_leaf + 1):
        if not xs[i] > xs[i - 1]:
            continue
        out[i] = _sorted_leaf_loss(np.sort(rs[:i]), tau) + _sorted_leaf_loss(np.sort(rs[i:]), tau)
    return out


@njit(cache=True)
def kalman_loop(T, RR, P0, W, tol, lag):
    """Harvey-form Kalman recursion for an ARMA state, stopped at steady state.

    Returns ``(V, F, t, a)``: innovations and relative variances for the
    first ``t`` rows of ``W`` and the predicted state after row ``t - 1``.
    ``t < n`` means the filter converged (P == RR within ``tol``) and the
    remaining rows can be handled by plain ARMA inversion. ``t == -1``
    signals a non-positive innovation variance.
    """
    n, m = W.shape
    r = T.shape[0]
    P = P0.copy()
    a = np.zeros((r, m))
    V = np.empty((n, m))
    F = np.ones(n)
    t = 0
    while t < n:
        f = P[0, 0]
        if not f > 0:
            return V, F, -1, a
        for j in range(m):
            V[t, j] = W[t, j] - a[0, j]
        F[t] = f
        K = (T @ P[:, 0].copy()) / f
        a = T @ a
        for i in range(r):
            for j in range(m):
                a[i, j] += K[i] * V[t, j]
        P = T @ P @ T.T + RR
        for i in range(r):
            for k in range(r):
                P[i, k] -= f * K[i] * K[k]
        t += 1
        if t >= lag and abs(P[0, 0] - 1.0) < tol:
            done = True
            for i in range(r):
                for k in range(r):
                    if abs(P[i, k] - RR[i, k]) >= tol:
                        done = False
            if done:
                break
    return V, F, t, a
