"""Poisson INGARCH(p, q) with exogenous regressors (identity link).

    M_t = omega + sum_i alpha_i Y_{t-i} + sum_j gamma_j M_{t-j} + X_t' beta

Parameters are estimated by maximising the Poisson quasi-log-likelihood
``sum_t (y_t log M_t - M_t)``. ``omega`` goes through ``exp`` and the
``alpha``/``gamma`` through softplus so the simplex search is unconstrained;
``beta`` is free, and the mean path is floored at ``mean_floor``. Raw
softplus arguments are kept above ``RAW_LOWER`` so a coefficient pinned at
zero does not leave the simplex wandering along a flat valley.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

from ._kernels import ingarch_path
from .arima import PointForecast
from .errors import EstimationError, OptimizationError, PreconditionError, SchemaError
from .numerics import nelder_mead_min, ols_fit

log = logging.getLogger(__name__)

MEAN_FLOOR = 1e-8
# softplus(-25) ~ 1e-11: below this the objective is flat in a coefficient and
# the simplex would drift instead of shrinking, so the region is walled off.
RAW_LOWER = -25.0


def _softplus(x):
    return np.logaddexp(0.0, x)


def _softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return np.where(y > 30, y, np.log(np.expm1(np.maximum(y, 1e-12))))


@dataclass(frozen=True)
class IngarchFit:
    omega: float
    alpha: np.ndarray
    gamma: np.ndarray
    beta: np.ndarray
    loglik: float
    init_mean: float
    nobs: int
    mean_floor: float = MEAN_FLOOR
    nonstationary: bool = False
    converged: bool = True
    raw: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def order(self) -> tuple[int, int]:
        return (self.alpha.size, self.gamma.size)

    def to_dict(self) -> dict:
        return {
            "order": list(self.order),
            "omega": self.omega,
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "beta": self.beta.tolist(),
            "loglik": self.loglik,
            "nobs": self.nobs,
            "nonstationary": self.nonstationary,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _as_matrix(X, n):
    if X is None:
        return np.zeros((n, 0))
    X = np.asarray(getattr(X, "data", X), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise SchemaError(f"regressor rows {X.shape[0]} != series length {n}")
    return X


def mean_path(omega, alpha, gamma, beta, y, X=None, init_mean=None, floor=MEAN_FLOOR) -> np.ndarray:
    """In-sample conditional means; pre-sample Y and M are set to ``init_mean``."""
    y = np.asarray(y, dtype=float)
    n = y.size
    Xm = _as_matrix(X, n)
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m0 = float(y.mean()) if init_mean is None else float(init_mean)
    xb = Xm @ beta if Xm.shape[1] else np.zeros(n)
    return ingarch_path(float(omega), alpha, gamma, xb, y, m0, float(floor))


def quasi_loglik(M, y) -> float:
    return float(np.sum(np.asarray(y) * np.log(M) - M))


def _unpack(theta, p, q):
    omega = float(np.exp(theta[0]))
    alpha = _softplus(theta[1:1 + p])
    gamma = _softplus(theta[1 + p:1 + p + q])
    beta = np.asarray(theta[1 + p + q:], dtype=float)
    return omega, alpha, gamma, beta


def fit_ingarch(y, X=None, order: tuple[int, int] = (1, 1), tol: float = 1e-9, max_iter: int = 60000,
                floor: float = MEAN_FLOOR) -> IngarchFit:
    """Poisson QML fit; see the module docstring for the parameterisation."""
    y = np.asarray(getattr(y, "counts", y), dtype=float)
    n = y.size
    if n < 15:
        raise PreconditionError(f"INGARCH needs at least 15 observations, got {n}")
    if np.any(y < 0):
        raise PreconditionError("counts must be non-negative")
    Xm = _as_matrix(X, n)
    p, q = order
    k = Xm.shape[1]
    m0 = float(y.mean())
    if m0 <= 0:
        raise EstimationError("all counts are zero; the Poisson mean is not identified")

    persist = 0.2 * p + 0.2 * q
    a0 = np.full(p, 0.2)
    g0 = np.full(q, 0.2)
    b0 = np.zeros(k)
    if k:
        b0 = ols_fit(np.column_stack([np.ones(n), Xm]), y).beta[1:] * (1.0 - persist)
    w0 = m0 * (1.0 - persist) - (Xm.mean(axis=0) @ b0 if k else 0.0)
    w0 = max(w0, 0.05 * m0)
    start = np.concatenate([[np.log(w0)], _softplus_inv(a0), _softplus_inv(g0), b0])

    def negll(theta):
        if np.any(theta[1:1 + p + q] < RAW_LOWER):
            return np.inf
        omega, alpha, gamma, beta = _unpack(theta, p, q)
        M = mean_path(omega, alpha, gamma, beta, y, Xm, m0, floor)
        return -quasi_loglik(M, y)

    try:
        res = nelder_mead_min(negll, start, tol=tol, max_iter=max_iter, step=0.25, restarts=3)
    except OptimizationError as exc:
        raise EstimationError(f"INGARCH likelihood search failed: {exc}") from exc
    x, fun, converged = res.x, res.fun, res.converged
    if not converged:
        # Long curved valleys (typically gamma > 1 on short series) make the
        # simplex crawl; a quasi-Newton polish from its best vertex finishes
        # the job; if it also stalls the simplex gets one more budget.
        with np.errstate(all="ignore"):
            pol = optimize.minimize(negll, x, method="BFGS", options={"gtol": 1e-7, "maxiter": 2000})
        if np.isfinite(pol.fun) and pol.fun <= fun:
            x, fun, converged = pol.x, float(pol.fun), bool(pol.success)
        if not converged:
            res = nelder_mead_min(negll, x, tol=tol, max_iter=max_iter, step=0.01, restarts=1)
            x, fun, converged = res.x, res.fun, res.converged
    if not converged:
        raise EstimationError(
            f"INGARCH({p},{q}) did not converge in {max_iter} iterations",
            {"theta": x.tolist(), "negloglik": fun},
        )
    res = res._replace(x=x, fun=fun)
    omega, alpha, gamma, beta = _unpack(res.x, p, q)
    if alpha.sum() + gamma.sum() >= 1.0:
        log.warning("INGARCH fit is non-stationary: sum(alpha) + sum(gamma) = %.3f", alpha.sum() + gamma.sum())
    return IngarchFit(
        omega=omega,
        alpha=alpha,
        gamma=gamma,
        beta=beta,
        loglik=-res.fun,
        init_mean=m0,
        nobs=n,
        mean_floor=floor,
        nonstationary=bool(alpha.sum() + gamma.sum() >= 1.0),
        converged=res.converged,
        raw=res.x,
    )


def next_mean(omega, alpha, gamma, beta, y_hist, m_hist, x_next=None, floor=MEAN_FLOOR) -> float:
    """``M_{T+1}`` from the most recent counts and means (latest last)."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    y_hist = np.asarray(y_hist, dtype=float)
    m_hist = np.asarray(m_hist, dtype=float)
    m = omega
    m += sum(alpha[i] * y_hist[-1 - i] for i in range(alpha.size))
    m += sum(gamma[j] * m_hist[-1 - j] for j in range(gamma.size))
    if beta.size:
        m += float(np.asarray(x_next, dtype=float) @ beta)
    return max(float(m), floor)


def forecast_ingarch(fit: IngarchFit, y, X=None, X_next=None) -> PointForecast:
    """One-step forecast: mean ``M_{T+1}``, sd ``sqrt(M_{T+1})``."""
    y = np.asarray(getattr(y, "counts", y), dtype=float)
    Xm = _as_matrix(X, y.size)
    if Xm.shape[1] != fit.beta.size:
        raise SchemaError(f"history has {Xm.shape[1]} regressors, fit expects {fit.beta.size}")
    x_next = np.zeros(0) if X_next is None else np.atleast_1d(np.asarray(X_next, dtype=float))
    if x_next.size != fit.beta.size:
        raise SchemaError(f"X_next has {x_next.size} values, fit expects {fit.beta.size}")
    p, q = fit.order
    if y.size < max(p, q):
        raise PreconditionError("history shorter than the model order")
    M = mean_path(fit.omega, fit.alpha, fit.gamma, fit.beta, y, Xm, fit.init_mean, fit.mean_floor)
    m = next_mean(fit.omega, fit.alpha, fit.gamma, fit.beta, y, M, x_next, fit.mean_floor)
    return PointForecast(m, float(np.sqrt(m)))


def poisson_quantiles(mean: float, taus) -> np.ndarray:
    """Exact conditional-Poisson quantiles, the non-default alternative to the normal adapter."""
    return stats.poisson.ppf(np.asarray(taus, dtype=float), mean).astype(float)


def simulate_ingarch(omega, alpha, gamma, n, rng, burn: int = 200) -> np.ndarray:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    p, q = alpha.size, gamma.size
    mu = omega / max(1e-9, 1.0 - alpha.sum() - gamma.sum())
    ys = [mu] * p
    ms = [mu] * q
    out = []
    for _ in range(n + burn):
        m = omega + sum(alpha[i] * ys[-1 - i] for i in range(p)) + sum(gamma[j] * ms[-1 - j] for j in range(q))
        yt = float(rng.poisson(m))
        ys.append(yt)
        ms.append(m)
        out.append(yt)
    return np.asarray(out[burn:])
