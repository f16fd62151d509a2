"""Numerical kernels shared by the models.

Everything here is a pure function of its arguments: least squares, a
Nelder-Mead simplex minimiser, the KPSS level-stationarity statistic, AICc,
standard normal CDF/quantile and the pinball (check) loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .errors import DegenerateSeriesError, DomainError, OptimizationError, SingularDesignError

# KPSS level-stationarity critical values (10%, 5%, 1%).
KPSS_CRITICAL_VALUES = {0.10: 0.347, 0.05: 0.463, 0.01: 0.739}


@dataclass(frozen=True)
class OlsFit:
    beta: np.ndarray
    residual_variance: float
    n: int
    k: int
    residuals: np.ndarray


def ols_fit(X, y, rcond: float = 1e-10) -> OlsFit:
    """Least squares through a thin QR factorisation.

    Parameters
    ----------
    X : (n, k) array
        Design matrix. Include the intercept column yourself.
    y : (n,) array

    Raises
    ------
    SingularDesignError
        If ``X`` is rank deficient (relative to ``rcond``).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DomainError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, k = X.shape
    if n < k:
        raise SingularDesignError(f"{n} rows cannot identify {k} coefficients")
    q, r = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(X, axis=0).max() if k else 0.0
    if k and (scale == 0.0 or diag.min() <= rcond * scale):
        raise SingularDesignError("design matrix is rank deficient")
    beta = np.linalg.solve(r, q.T @ y) if k else np.zeros(0)
    resid = y - X @ beta
    dof = n - k
    rv = float(resid @ resid / dof) if dof > 0 else 0.0
    return OlsFit(beta=beta, residual_variance=rv, n=n, k=k, residuals=resid)


class OptimizeResult(NamedTuple):
    x: np.ndarray
    fun: float
    nit: int
    converged: bool


def _initial_simplex(x0: np.ndarray, step: float | None) -> np.ndarray:
    n = x0.size
    sim = np.tile(x0, (n + 1, 1))
    for i in range(n):
        if step is not None:
            sim[i + 1, i] += step
        elif x0[i] != 0.0:
            sim[i + 1, i] *= 1.05
        else:
            sim[i + 1, i] = 0.00025
    return sim


def nelder_mead_min(
    f: Callable[[np.ndarray], float],
    x0,
    tol: float = 1e-8,
    max_iter: int = 5000,
    step: float | None = None,
    restarts: int = 1,
) -> OptimizeResult:
    """Minimise ``f`` with the Nelder-Mead simplex method.

    Stops when the simplex diameter (largest distance from the best vertex)
    falls below ``tol`` or after ``max_iter`` iterations. Non-finite function
    values are treated as +inf, which lets callers encode hard constraints.
    After convergence the search is restarted ``restarts`` times from the
    best vertex with a fresh simplex, which guards against a collapsed
    simplex stalling on a slope. Fully deterministic for a given ``x0``.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    total_it = 0
    best = None
    for attempt in range(restarts + 1):
        res = _nelder_mead_once(f, x, tol, max_iter - total_it, step)
        total_it += res.nit
        if best is not None and res.fun >= best.fun - 1e-15 * max(1.0, abs(best.fun)):
            if res.fun < best.fun:
                best = res
            break
        best = res
        x = res.x
        if total_it >= max_iter:
            break
    return OptimizeResult(best.x, best.fun, total_it, best.converged)


def _nelder_mead_once(f, x0, tol, max_iter, step) -> OptimizeResult:
    def fv(z):
        try:
            v = float(f(z))
        except (FloatingPointError, OverflowError, ZeroDivisionError, np.linalg.LinAlgError):
            return np.inf
        return v if np.isfinite(v) else np.inf

    n = x0.size
    sim = _initial_simplex(x0, step)
    fs = np.array([fv(v) for v in sim])
    if not np.isfinite(fs).any():
        raise OptimizationError("objective is non-finite at every initial probe")

    rho, chi, psi, sigma = 1.0, 2.0, 0.5, 0.5
    it = 0
    converged = False
    while it < max_iter:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.linalg.norm(sim[1:] - sim[0], axis=1)) if n else 0.0
        if diam < tol and np.isfinite(fs[0]):
            converged = True
            break
        it += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + rho * (centroid - sim[-1])
        fr = fv(xr)
        if fr < fs[0]:
            xe = centroid + chi * (xr - centroid)
            fe = fv(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + psi * (xr - centroid)
            fc = fv(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + psi * (sim[-1] - centroid)
            fc = fv(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        # shrink towards the best vertex
        sim[1:] = sim[0] + sigma * (sim[1:] - sim[0])
        fs[1:] = [fv(v) for v in sim[1:]]

    i = int(np.argmin(fs))
    if not np.isfinite(fs[i]):
        raise OptimizationError("objective never became finite")
    return OptimizeResult(sim[i].copy(), float(fs[i]), it, converged)


@dataclass(frozen=True)
class KpssResult:
    statistic: float
    lags: int
    reject_at_5pct: bool

    def reject(self, level: float = 0.05) -> bool:
        return self.statistic > KPSS_CRITICAL_VALUES[level]


def kpss_auto_lags(n: int) -> int:
    return int(np.floor(4.0 * (n / 100.0) ** 0.25))


def kpss_statistic(y, lags: int | str = "auto") -> KpssResult:
    """KPSS statistic for the null of level stationarity.

    The long-run variance uses the Newey-West estimator with Bartlett
    weights ``1 - h/(lags+1)``. With ``lags="auto"`` the truncation lag is
    ``floor(4 (n/100)^(1/4))``.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 10:
        raise DomainError(f"KPSS needs at least 10 observations, got {n}")
    e = y - y.mean()
    if np.max(np.abs(e)) <= 1e-12 * max(1.0, np.max(np.abs(y))):
        raise DegenerateSeriesError("KPSS is undefined for a constant series")
    nlags = kpss_auto_lags(n) if lags == "auto" else int(lags)
    if nlags < 0 or nlags >= n:
        raise DomainError(f"invalid lag truncation {nlags} for n={n}")
    s2 = e @ e / n
    for h in range(1, nlags + 1):
        s2 += 2.0 * (1.0 - h / (nlags + 1.0)) * (e[h:] @ e[:-h]) / n
    partial = np.cumsum(e)
    stat = float(partial @ partial / (n * n * s2))
    return KpssResult(stat, nlags, stat > KPSS_CRITICAL_VALUES[0.05])


def aicc(loglik: float, k: int, n: int) -> float:
    """Small-sample corrected AIC, ``-2 loglik + 2k + 2k(k+1)/(n-k-1)``."""
    if n <= k + 1:
        raise DomainError(f"AICc undefined for n={n}, k={k}")
    return -2.0 * loglik + 2.0 * k + 2.0 * k * (k + 1) / (n - k - 1)


def normal_cdf(x):
    return special.ndtr(x)


def normal_quantile(tau):
    t = np.asarray(tau, dtype=float)
    if np.any(~((t > 0.0) & (t < 1.0))):
        raise DomainError(f"quantile level must lie in (0, 1), got {tau}")
    q = special.ndtri(t)
    return float(q) if np.ndim(q) == 0 else q


def _check_tau(tau):
    t = np.asarray(tau, dtype=float)
    if np.any(~((t > 0.0) & (t < 1.0))):
        raise DomainError(f"quantile level must lie in (0, 1), got {tau}")


def pinball(y, q, tau):
    """Check loss ``rho_tau(y - q)``: ``tau (y-q)`` above, ``(1-tau)(q-y)`` below."""
    _check_tau(tau)
    u = np.asarray(y, dtype=float) - np.asarray(q, dtype=float)
    out = np.where(u >= 0.0, tau * u, (tau - 1.0) * u)
    return float(out) if np.ndim(out) == 0 else out
