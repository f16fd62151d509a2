"""Regression with ARIMA errors.

The model is ``y_t = c + X_t' beta + eta_t`` with ``(1-B)^d eta_t`` a
stationary, invertible ARMA(p, q). The Gaussian likelihood of the differenced
series is evaluated exactly with a Kalman filter; the regression
coefficients and the innovation variance are concentrated out in closed form
so the simplex search only runs over the ARMA parameters. Stationarity and
invertibility are enforced by mapping unconstrained values through partial
autocorrelations.

``xreg="equation"`` switches to the literal ``phi(B)(1-B)^d y_t =
theta(B) eps_t + X_t' beta`` placement of the regressors.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from math import comb, log, pi

import numpy as np
from scipy import linalg, signal

from ._kernels import kalman_loop
from .errors import (
    DegenerateSeriesError,
    EstimationError,
    OptimizationError,
    PreconditionError,
    SchemaError,
    SingularDesignError,
)
from .numerics import aicc, kpss_statistic, nelder_mead_min, ols_fit

log_ = logging.getLogger(__name__)

MAX_P = 5
MAX_Q = 5
MAX_D = 2
# candidates with an AR or MA root inside this modulus are discarded during
# order search: such fits sit on the edge of the admissible region, usually
# with near-cancelling AR and MA factors, and their AICc is not trustworthy
UNIT_ROOT_BOUND = 1.01


@dataclass(frozen=True)
class ArimaOrder:
    p: int
    d: int
    q: int
    fallback: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.d <= MAX_D and 0 <= self.p <= MAX_P and 0 <= self.q <= MAX_Q):
            raise PreconditionError(f"order ({self.p},{self.d},{self.q}) out of range")

    @property
    def tuple(self) -> tuple[int, int, int]:
        return (self.p, self.d, self.q)


@dataclass(frozen=True)
class ArimaFit:
    order: ArimaOrder
    phi: np.ndarray
    theta: np.ndarray
    beta: np.ndarray
    intercept: float
    sigma2: float
    loglik: float
    aicc: float
    nobs: int
    xreg: str = "errors"
    include_mean: bool = True
    converged: bool = True

    @property
    def n_regressors(self) -> int:
        return self.beta.size

    @property
    def n_params(self) -> int:
        return self.order.p + self.order.q + self.beta.size + int(self.include_mean) + 1

    def to_dict(self) -> dict:
        return {
            "order": list(self.order.tuple),
            "phi": self.phi.tolist(),
            "theta": self.theta.tolist(),
            "beta": self.beta.tolist(),
            "intercept": self.intercept,
            "sigma2": self.sigma2,
            "loglik": self.loglik,
            "aicc": self.aicc,
            "nobs": self.nobs,
            "xreg": self.xreg,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class PointForecast:
    mean: float
    sd: float

    def __post_init__(self):
        if not (np.isfinite(self.sd) and self.sd > 0 and np.isfinite(self.mean)):
            raise EstimationError(f"invalid point forecast mean={self.mean} sd={self.sd}")


# -- parameter transforms -------------------------------------------------

def pacf_to_poly(u) -> np.ndarray:
    """Map unconstrained reals to coefficients of a stable ``1 - sum a_i B^i``."""
    r = np.tanh(np.asarray(u, dtype=float))
    a = np.zeros(0)
    for k, rk in enumerate(r):
        a = np.concatenate([a - rk * a[::-1], [rk]]) if k else np.array([rk])
    return a


def poly_to_pacf(a) -> np.ndarray:
    a = np.asarray(a, dtype=float).copy()
    r = np.zeros(a.size)
    for k in range(a.size - 1, -1, -1):
        rk = a[k]
        if abs(rk) >= 1.0:
            raise ValueError("polynomial is not stable")
        r[k] = rk
        a = (a[:k] + rk * a[:k][::-1]) / (1.0 - rk * rk)
    return np.arctanh(r)


def _shrink_into_region(a, limit: float = 0.98) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    for scale in (1.0, 0.9, 0.7, 0.5, 0.3, 0.1, 0.0):
        try:
            u = poly_to_pacf(a * scale)
        except ValueError:
            continue
        return np.clip(u, -np.arctanh(limit), np.arctanh(limit))
    return np.zeros(a.size)


def unpack(u, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float)
    phi = pacf_to_poly(u[:p]) if p else np.zeros(0)
    theta = -pacf_to_poly(u[p:p + q]) if q else np.zeros(0)
    return phi, theta


def pack(phi, theta) -> np.ndarray:
    return np.concatenate([_shrink_into_region(phi), _shrink_into_region(-np.asarray(theta))])


# -- Kalman filter --------------------------------------------------------

def _state_space(phi, theta):
    p, q = len(phi), len(theta)
    r = max(p, q + 1)
    T = np.zeros((r, r))
    T[:p, 0] = phi
    T[np.arange(r - 1), np.arange(1, r)] = 1.0
    R = np.zeros(r)
    R[0] = 1.0
    R[1:q + 1] = theta
    RR = np.outer(R, R)
    P0 = linalg.solve_discrete_lyapunov(T, RR) if r > 1 or p else RR.copy()
    return T, RR, P0


def kalman_innovations(phi, theta, W, tol: float = 1e-13):
    """Innovations of the zero-mean ARMA applied to each column of ``W``.

    Returns ``(V, F, a_next)``: standardised-scale innovations (n, m), their
    relative variances (n,) and the one-step-ahead predicted state for the
    first state component after the last observation (m,). Once the filter
    reaches its steady state (F = 1) the remaining innovations are produced
    by the equivalent ARMA inversion, which is exact in that regime.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n, m = W.shape
    p, q = phi.size, theta.size
    T, RR, P = _state_space(phi, theta)
    lag = max(p, q)
    V, F, t, a = kalman_loop(T, RR, P, np.ascontiguousarray(W), tol, lag)
    if t < 0:
        raise np.linalg.LinAlgError("non-positive innovation variance")
    if t < n:
        b = np.concatenate([[1.0], -phi])
        den = np.concatenate([[1.0], theta])
        zi = np.empty((max(b.size, den.size) - 1, m))
        for j in range(m):
            zi[:, j] = signal.lfiltic(b, den, y=V[t - 1::-1, j][:q] if q else [], x=W[t - 1::-1, j][:p] if p else [])
        V[t:], _ = signal.lfilter(b, den, W[t:], axis=0, zi=zi)
        # predicted state after the last observation: ARMA one-step forecast
        nxt = np.zeros(m)
        for i in range(p):
            nxt += phi[i] * W[n - 1 - i]
        for j in range(q):
            nxt += theta[j] * V[n - 1 - j]
        return V, F, nxt
    return V, F, a[0].copy()


# -- design helpers -------------------------------------------------------

def difference(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    for _ in range(d):
        x = np.diff(x, axis=0)
    return x


def _as_matrix(X, n: int) -> np.ndarray:
    if X is None:
        return np.zeros((n, 0))
    X = np.asarray(getattr(X, "data", X), dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != n:
        raise SchemaError(f"regressor rows {X.shape[0]} != series length {n}")
    return X


def _design(y, X, d: int, include_mean: bool):
    n = len(y)
    X = _as_matrix(X, n)
    if include_mean and d == 0:
        D = np.column_stack([np.ones(n), X])
    else:
        D = X
    return D


@dataclass
class _Problem:
    """Data for one fixed order; evaluates the concentrated likelihood."""

    w: np.ndarray           # differenced response (errors form) or response for the MA stage
    Dw: np.ndarray          # matching design columns
    p: int
    q: int
    xreg: str

    def concentrated(self, u):
        phi, theta = unpack(u, self.p, self.q)
        if self.xreg == "equation" and self.p:
            z, Dz = _ar_filter(self.w, self.Dw, phi)
            V, F, _ = kalman_innovations(np.zeros(0), theta, np.column_stack([z, Dz]))
        else:
            V, F, _ = kalman_innovations(phi, theta, np.column_stack([self.w, self.Dw]))
        n = V.shape[0]
        sw = 1.0 / np.sqrt(F)
        vy = V[:, 0] * sw
        if self.Dw.shape[1]:
            VX = V[:, 1:] * sw[:, None]
            beta, *_ = np.linalg.lstsq(VX, vy, rcond=None)
            resid = vy - VX @ beta
        else:
            beta = np.zeros(0)
            resid = vy
        sigma2 = float(resid @ resid / n)
        if not sigma2 > 0:
            sigma2 = 1e-300
        ll = -0.5 * n * (log(2 * pi * sigma2) + 1.0) - 0.5 * float(np.sum(np.log(F)))
        return ll, beta, sigma2, phi, theta

    def negll(self, u) -> float:
        return -self.concentrated(u)[0]

    def css(self, u, beta0) -> float:
        phi, theta = unpack(u, self.p, self.q)
        z = self.w - self.Dw @ beta0
        e = signal.lfilter(np.concatenate([[1.0], -phi]), np.concatenate([[1.0], theta]), z)
        e = e[self.p:]
        return float(e @ e)


def _ar_filter(w, D, phi):
    p = phi.size
    b = np.concatenate([[1.0], -phi])
    z = signal.lfilter(b, [1.0], w)[p:]
    return z, D[p:]


def fit_arima(
    y,
    X=None,
    order: ArimaOrder | tuple = (0, 0, 0),
    include_mean: bool = True,
    xreg: str = "errors",
    tol: float = 1e-9,
    max_iter: int = 4000,
) -> ArimaFit:
    """Quasi-ML fit of an ARIMA(p,d,q) regression.

    CSS estimates seed the exact Gaussian likelihood search. With p = q = 0
    the fit is ordinary least squares and needs no iterations.
    """
    if not isinstance(order, ArimaOrder):
        order = ArimaOrder(*order)
    if xreg not in ("errors", "equation"):
        raise PreconditionError(f"unknown regressor placement {xreg!r}")
    y = np.asarray(y, dtype=float)
    n = y.size
    Xm = _as_matrix(X, n)
    p, d, q = order.tuple
    if n <= p + q + d + Xm.shape[1] + 5:
        raise PreconditionError(f"series of length {n} too short for order {order.tuple} with {Xm.shape[1]} regressors")

    use_mean = include_mean and d == 0
    if xreg == "errors":
        w = difference(y, d)
        Dw = difference(_design(y, Xm, d, include_mean), d) if d else _design(y, Xm, d, include_mean)
    else:
        w = difference(y, d)
        base = np.column_stack([np.ones(n), Xm]) if use_mean else Xm
        Dw = base[d:]
    if Dw.shape[1]:
        beta0 = ols_fit(Dw, w).beta
    else:
        beta0 = np.zeros(0)

    prob = _Problem(w, Dw, p, q, xreg)
    k = p + q
    converged = True
    if k == 0:
        u = np.zeros(0)
    else:
        try:
            css = nelder_mead_min(lambda v: prob.css(v, beta0), np.zeros(k), tol=1e-6, max_iter=max_iter, step=0.1)
            start = css.x
            if not np.isfinite(prob.negll(start)):
                start = np.zeros(k)
            res = nelder_mead_min(prob.negll, start, tol=tol, max_iter=max_iter, step=0.1, restarts=2)
        except OptimizationError as exc:
            raise EstimationError(f"ARIMA{order.tuple} likelihood search failed: {exc}") from exc
        u = res.x
        converged = res.converged
        if not converged:
            raise EstimationError(
                f"ARIMA{order.tuple} did not converge in {max_iter} iterations",
                {"u": res.x.tolist(), "negloglik": res.fun},
            )
    ll, beta, sigma2, phi, theta = prob.concentrated(u)
    if not np.isfinite(ll):
        raise EstimationError(f"ARIMA{order.tuple} likelihood is not finite", {"u": u.tolist()})
    nobs = w.size - (p if xreg == "equation" else 0)
    intercept = float(beta[0]) if use_mean else 0.0
    reg = beta[1:] if use_mean else beta
    npar = k + beta.size + 1
    try:
        crit = aicc(ll, npar, nobs)
    except Exception:
        crit = np.inf
    return ArimaFit(
        order=ArimaOrder(p, d, q),
        phi=phi,
        theta=theta,
        beta=np.asarray(reg, dtype=float),
        intercept=intercept,
        sigma2=sigma2,
        loglik=float(ll),
        aicc=float(crit),
        nobs=int(nobs),
        xreg=xreg,
        include_mean=use_mean,
        converged=converged,
    )


def arima_loglik(fit_or_order, y, X=None, phi=None, theta=None, beta=None, intercept=0.0, sigma2=1.0,
                 xreg: str = "errors") -> float:
    """Gaussian log-likelihood at explicit parameters (no concentration).

    Used for finite-difference checks of fitted optima.
    """
    if isinstance(fit_or_order, ArimaFit):
        f = fit_or_order
        order, xreg = f.order, f.xreg
        phi = f.phi if phi is None else phi
        theta = f.theta if theta is None else theta
        beta = f.beta if beta is None else beta
    else:
        order = fit_or_order if isinstance(fit_or_order, ArimaOrder) else ArimaOrder(*fit_or_order)
    y = np.asarray(y, dtype=float)
    Xm = _as_matrix(X, y.size)
    beta = np.zeros(Xm.shape[1]) if beta is None else np.asarray(beta, dtype=float)
    phi = np.asarray(phi if phi is not None else np.zeros(order.p), dtype=float)
    theta = np.asarray(theta if theta is not None else np.zeros(order.q), dtype=float)
    d = order.d
    if xreg == "errors":
        eta = y - intercept - Xm @ beta
        w = difference(eta, d)
        V, F, _ = kalman_innovations(phi, theta, w)
    else:
        p = phi.size
        w = difference(y, d)
        z = signal.lfilter(np.concatenate([[1.0], -phi]), [1.0], w)[p:] - intercept - (Xm @ beta)[d + p:]
        V, F, _ = kalman_innovations(np.zeros(0), theta, z)
    v = V[:, 0]
    n = v.size
    return float(-0.5 * n * log(2 * pi * sigma2) - 0.5 * np.sum(np.log(F)) - 0.5 * np.sum(v * v / F) / sigma2)


def forecast_arima(fit: ArimaFit, y, X=None, X_next=None) -> PointForecast:
    """One-step-ahead conditional mean and innovation sd.

    ``y`` and ``X`` are the history the model is conditioned on (normally
    the training data); ``X_next`` is the regressor row of the forecast year.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    Xm = _as_matrix(X, n)
    if Xm.shape[1] != fit.n_regressors:
        raise SchemaError(f"history has {Xm.shape[1]} regressors, fit expects {fit.n_regressors}")
    x_next = np.zeros(0) if X_next is None else np.atleast_1d(np.asarray(X_next, dtype=float))
    if x_next.size != fit.n_regressors:
        raise SchemaError(f"X_next has {x_next.size} values, fit expects {fit.n_regressors}")
    d = fit.order.d
    if fit.xreg == "errors":
        eta = y - fit.intercept - Xm @ fit.beta
        w = difference(eta, d)
        _, _, nxt = kalman_innovations(fit.phi, fit.theta, w)
        w_hat = float(nxt[0])
        # undo differencing: eta_{T+1} = w_hat - sum_{i=1..d} C(d,i) (-1)^i eta_{T+1-i}
        eta_hat = w_hat - sum(comb(d, i) * (-1) ** i * eta[n - i] for i in range(1, d + 1))
        mean = fit.intercept + float(x_next @ fit.beta) + eta_hat
    else:
        wy = difference(y, d)
        p = fit.phi.size
        z = (signal.lfilter(np.concatenate([[1.0], -fit.phi]), [1.0], wy)[p:]
             - fit.intercept - (Xm @ fit.beta)[d + p:])
        _, _, nxt = kalman_innovations(np.zeros(0), fit.theta, z)
        ar = sum(fit.phi[i] * wy[wy.size - 1 - i] for i in range(p))
        w_hat = fit.intercept + float(x_next @ fit.beta) + ar + float(nxt[0])
        mean = w_hat - sum(comb(d, i) * (-1) ** i * y[n - i] for i in range(1, d + 1))
    return PointForecast(float(mean), float(np.sqrt(fit.sigma2)))


# -- Hyndman-Khandakar order selection ------------------------------------

def select_differencing(y, X=None, max_d: int = MAX_D, alpha: float = 0.05) -> int:
    """Smallest d whose differenced regression residuals pass KPSS."""
    y = np.asarray(y, dtype=float)
    Xm = _as_matrix(X, y.size)
    if Xm.shape[1]:
        resid = ols_fit(np.column_stack([np.ones(y.size), Xm]), y).residuals
    else:
        resid = y
    for d in range(max_d + 1):
        x = difference(resid, d)
        if x.size < 10:
            return max(d - 1, 0) if d else 0
        try:
            if not kpss_statistic(x).reject(alpha):
                return d
        except DegenerateSeriesError:
            return d
    return max_d


def _min_root_modulus(coefs) -> float:
    """Smallest |root| of ``1 - sum c_i z^i`` (inf for an empty polynomial)."""
    c = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    if not c.size:
        return np.inf
    return float(np.min(np.abs(np.roots(np.concatenate([-c[::-1], [1.0]])))))


def near_unit_root(fit: ArimaFit, bound: float = UNIT_ROOT_BOUND) -> bool:
    """True when an AR or MA root lies within ``bound`` of the unit circle."""
    return _min_root_modulus(fit.phi) < bound or _min_root_modulus(-fit.theta) < bound


def select_arima_order(
    y,
    X=None,
    max_p: int = MAX_P,
    max_q: int = MAX_Q,
    max_d: int = MAX_D,
    xreg: str = "errors",
    return_table: bool = False,
):
    """Hyndman-Khandakar style stepwise search.

    d comes from repeated KPSS tests; then (p, q) starts from the best of
    (2,2), (0,0), (1,0), (0,1) by AICc and moves to the best improving
    neighbour (p or q changed by one, or both) until none improves.
    Candidates with a root within ``UNIT_ROOT_BOUND`` of the unit circle
    are scored as infinite.
    """
    y = np.asarray(y, dtype=float)
    if y.size < 15:
        raise PreconditionError(f"order selection needs at least 15 observations, got {y.size}")
    d = select_differencing(y, X, max_d)
    table: dict[tuple[int, int], float] = {}

    def score(p, q):
        if (p, q) in table:
            return table[(p, q)]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                f = fit_arima(y, X, ArimaOrder(p, d, q), xreg=xreg)
            val = np.inf if near_unit_root(f) else f.aicc
        except (EstimationError, PreconditionError, SingularDesignError, np.linalg.LinAlgError) as exc:
            log_.debug("ARIMA(%d,%d,%d) failed: %s", p, d, q, exc)
            val = np.inf
        table[(p, q)] = val
        return val

    starts = [(min(2, max_p), min(2, max_q)), (0, 0), (min(1, max_p), 0), (0, min(1, max_q))]
    best, best_val = None, np.inf
    for pq in starts:
        v = score(*pq)
        if v < best_val:
            best, best_val = pq, v
    if best is None:
        log_.warning("all starting ARIMA fits failed; falling back to (0,%d,0)", d)
        order = ArimaOrder(0, d, 0, fallback=True)
        return (order, table) if return_table else order
    while True:
        p0, q0 = best
        moves = [(p0 + dp, q0 + dq) for dp in (-1, 0, 1) for dq in (-1, 0, 1) if (dp, dq) != (0, 0)]
        moves = [(p, q) for p, q in moves if 0 <= p <= max_p and 0 <= q <= max_q]
        cand = min(moves, key=lambda pq: (score(*pq), pq))
        if table[cand] < best_val:
            best, best_val = cand, table[cand]
        else:
            break
    order = ArimaOrder(best[0], d, best[1])
    return (order, table) if return_table else order
