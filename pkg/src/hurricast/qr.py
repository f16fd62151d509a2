"""Linear quantile regression on a grid of quantile levels.

Coefficients minimise the summed pinball loss. The solver runs iteratively
reweighted least squares on a smoothed check function, annealing the
smoothing width towards zero, then finishes with a basis-exchange descent
over the vertices of the underlying linear program (``k`` observations
fitted exactly). The exchange stage makes the returned objective equal the
LP optimum rather than an approximation of it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError, SchemaError, SingularDesignError
from .numerics import ols_fit, pinball

DEFAULT_TAUS = tuple(round(0.05 * i, 2) for i in range(1, 20))
SMALL_TAUS = (0.1, 0.5, 0.9)


@dataclass(frozen=True)
class TauGrid:
    taus: tuple[float, ...] = DEFAULT_TAUS

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        if not taus:
            raise DomainError("empty quantile grid")
        for t in taus:
            if not 0.0 < t < 1.0:
                raise DomainError(f"quantile level {t} outside (0, 1)")
        for a, b in zip(taus, taus[1:]):
            if not b > a:
                raise DomainError(f"quantile levels must be strictly increasing (got {a} then {b})")
        object.__setattr__(self, "taus", taus)

    @classmethod
    def default(cls) -> "TauGrid":
        return cls(tuple(sorted(set(DEFAULT_TAUS) | set(SMALL_TAUS))))

    @classmethod
    def parse(cls, text: str) -> "TauGrid":
        return cls(tuple(float(t) for t in text.split(",") if t.strip()))

    def __len__(self) -> int:
        return len(self.taus)

    def __iter__(self):
        return iter(self.taus)

    def index(self, tau: float) -> int:
        for i, t in enumerate(self.taus):
            if abs(t - tau) < 1e-12:
                return i
        raise KeyError(tau)

    def subgrid(self, taus: Sequence[float]) -> "TauGrid":
        return TauGrid(tuple(self.taus[self.index(t)] for t in taus))


def monotone_rearrange(values) -> np.ndarray:
    """Sort a quantile curve so it is non-decreasing in tau (stable for ties)."""
    return np.sort(np.asarray(values, dtype=float), kind="stable")


@dataclass(frozen=True)
class QuantileForecast:
    taus: TauGrid
    values: np.ndarray
    point: float = field(default=float("nan"))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.taus),):
            raise SchemaError(f"{vals.size} values for a grid of {len(self.taus)}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if np.isnan(self.point):
            object.__setattr__(self, "point", self.median())

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))

    def at(self, tau: float) -> float:
        return float(self.values[self.taus.index(tau)])

    def median(self) -> float:
        try:
            return self.at(0.5)
        except KeyError:
            return float(np.interp(0.5, self.taus.taus, self.values))

    def restrict(self, grid: TauGrid) -> "QuantileForecast":
        return QuantileForecast(grid, np.array([self.at(t) for t in grid]), self.point)

    def to_dict(self) -> dict:
        return {"taus": list(self.taus.taus), "values": self.values.tolist(), "point": self.point}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self, year: int) -> list[str]:
        return [f"{year},{t!r},{float(v)!r}" for t, v in zip(self.taus, self.values)]


def check_objective(X, y, beta, tau) -> float:
    return float(np.sum(pinball(y, X @ beta, tau)))


def _irls(X, y, tau, beta, iters=60):
    h = max(np.median(np.abs(y - X @ beta)), 1e-3)
    ones = X.sum(axis=0)
    for _ in range(iters):
        r = y - X @ beta
        a = np.maximum(np.abs(r), h)
        W = 1.0 / a
        A = X.T @ (X * W[:, None])
        b = X.T @ (W * y) + (2 * tau - 1) * ones
        try:
            beta = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            break
        h = max(h * 0.5, 1e-10)
    return beta


def _basis_solution(X, y, S):
    XS = X[list(S)]
    if abs(np.linalg.det(XS)) < 1e-12 * max(1.0, np.abs(XS).max()) ** XS.shape[0]:
        return None
    return np.linalg.solve(XS, y[list(S)])


def _initial_basis(X, y, beta):
    n, k = X.shape
    order = np.argsort(np.abs(y - X @ beta), kind="stable")
    S: list[int] = []
    for i in order:
        cand = S + [int(i)]
        if np.linalg.matrix_rank(X[cand], tol=1e-10) == len(cand):
            S = cand
        if len(S) == k:
            return tuple(S)
    raise SingularDesignError("design matrix is rank deficient")


def _exchange(X, y, tau, S, max_rounds=500):
    """Steepest single-swap descent over LP vertices."""
    n, k = X.shape
    S = tuple(S)
    beta = _basis_solution(X, y, S)
    if beta is None:
        raise SingularDesignError("starting basis is singular")
    best = check_objective(X, y, beta, tau)
    for _ in range(max_rounds):
        improved = False
        cand_best, cand_S, cand_beta = best, None, None
        outside = [j for j in range(n) if j not in S]
        for pos in range(k):
            for j in outside:
                T = list(S)
                T[pos] = j
                b = _basis_solution(X, y, T)
                if b is None:
                    continue
                obj = check_objective(X, y, b, tau)
                if obj < cand_best - 1e-13 * max(1.0, abs(cand_best)):
                    cand_best, cand_S, cand_beta = obj, tuple(T), b
        if cand_S is not None:
            S, beta, best = cand_S, cand_beta, cand_best
            improved = True
        if not improved:
            break
    return S, beta, best


def fit_qr(X, y, tau: float) -> np.ndarray:
    """Coefficients minimising ``sum rho_tau(y - X beta)``.

    ``X`` must include the intercept column. When several coefficient
    vectors attain the optimum (flat empirical-quantile stretches) any one of
    them is returned.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"quantile level {tau} outside (0, 1)")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise SchemaError(f"shape mismatch: X {X.shape}, y {y.shape}")
    n, k = X.shape
    if n < k + 2:
        raise PreconditionError(f"{n} rows are too few for {k} coefficients")
    beta = ols_fit(X, y).beta  # raises on rank deficiency
    beta = _irls(X, y, tau, beta)
    # Tied responses make vertices degenerate and can stall single swaps;
    # descend on a slightly jittered copy first, then polish on the data.
    scale = float(np.std(y)) + 1.0
    jitter = np.random.default_rng(0).uniform(-1.0, 1.0, y.size) * 1e-9 * scale
    S = _initial_basis(X, y + jitter, beta)
    S, _, _ = _exchange(X, y + jitter, tau, S)
    _, beta, _ = _exchange(X, y, tau, S)
    return beta


@dataclass(frozen=True)
class QrFit:
    taus: TauGrid
    coefs: np.ndarray              # (len(taus), k), intercept first
    objectives: np.ndarray
    columns: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus.taus),
            "columns": ["intercept", *self.columns],
            "coefs": self.coefs.tolist(),
            "objectives": self.objectives.tolist(),
        }


def fit_qr_grid(X, y, taus: TauGrid | None = None, columns: Sequence[str] = ()) -> QrFit:
    """Fit every level of ``taus``; ``X`` excludes the intercept, which is added here."""
    taus = taus or TauGrid.default()
    X = np.asarray(getattr(X, "data", X), dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    D = np.column_stack([np.ones(y.size), X])
    coefs, objs = [], []
    for t in taus:
        b = fit_qr(D, y, t)
        coefs.append(b)
        objs.append(check_objective(D, y, b, t))
    return QrFit(taus, np.array(coefs), np.array(objs), tuple(columns))


def predict_qr(fit: QrFit, X_next) -> QuantileForecast:
    x = np.atleast_1d(np.asarray(X_next, dtype=float))
    if x.size != fit.coefs.shape[1] - 1:
        raise SchemaError(f"X_next has {x.size} values, fit expects {fit.coefs.shape[1] - 1}")
    raw = fit.coefs @ np.concatenate([[1.0], x])
    return QuantileForecast(fit.taus, monotone_rearrange(raw))

