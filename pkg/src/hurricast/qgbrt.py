"""Quantile gradient-boosted regression trees.

One ensemble per quantile level. Stage 0 is the empirical tau-quantile of
the response; every later stage grows a shallow tree on the current
residuals, choosing splits by the pinball loss of the leaf-wise residual
quantiles, and adds ``learning_rate`` times the leaf quantile to the fit.
Because each leaf value minimises the leaf's pinball loss, which is convex in
the shift, a damped step cannot increase the training loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import split_losses
from .errors import DomainError, PreconditionError, SchemaError
from .numerics import pinball
from .qr import QuantileForecast, TauGrid, monotone_rearrange


def empirical_quantile(values, tau: float) -> float:
    """Smallest value whose empirical CDF reaches ``tau`` (a pinball minimiser)."""
    v = np.sort(np.asarray(values, dtype=float))
    k = int(np.ceil(tau * v.size - 1e-12)) - 1
    return float(v[min(max(k, 0), v.size - 1)])


@dataclass(frozen=True)
class BoostHyperparams:
    n_trees: int = 200
    max_depth: int = 2
    learning_rate: float = 0.05
    min_leaf: int = 3
    seed: int = 0
    row_subsample: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise DomainError("n_trees must be at least 1")
        self._check_rest()

    def _check_rest(self):
        if self.max_depth < 1:
            raise DomainError("max_depth must be at least 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DomainError("learning_rate must lie in (0, 1]")
        if self.min_leaf < 1:
            raise DomainError("min_leaf must be at least 1")
        if not 0.0 < self.row_subsample <= 1.0:
            raise DomainError("row_subsample must lie in (0, 1]")

    @classmethod
    def unchecked(cls, **kw) -> "BoostHyperparams":
        """Build without the ``n_trees >= 1`` floor (lets tests inspect the base model)."""
        obj = object.__new__(cls)
        for f, v in {**{k: getattr(cls, k) for k in cls.__dataclass_fields__}, **kw}.items():
            object.__setattr__(obj, f, v)
        obj._check_rest()
        return obj


@dataclass(frozen=True)
class TreeNode:
    value: float = 0.0
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.is_leaf:
            return np.full(X.shape[0], self.value)
        out = np.empty(X.shape[0])
        go_left = X[:, self.feature] <= self.threshold
        out[go_left] = self.left.predict(X[go_left])
        out[~go_left] = self.right.predict(X[~go_left])
        return out

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.value}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf" in d:
            return cls(value=float(d["leaf"]))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(self.left.depth(), self.right.depth())


def _leaf_loss(r: np.ndarray, tau: float) -> tuple[float, float]:
    q = empirical_quantile(r, tau)
    u = np.sort(r - q)
    return float(np.sum(np.where(u >= 0, tau * u, (tau - 1) * u))), q


def _best_split(X: np.ndarray, r: np.ndarray, tau: float, min_leaf: int):
    """Exhaustive search over (feature, midpoint) pairs.

    Returns ``(loss, feature, threshold)`` of the first best candidate in
    (feature, threshold) order, or None when no admissible split exists.
    """
    m, nfeat = X.shape
    if m < 2 * min_leaf:
        return None
    best = None
    for f in range(nfeat):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        loss = split_losses(xs, r[order], tau, min_leaf)
        lmin = loss.min()
        if not np.isfinite(lmin):
            continue
        i = int(np.argmax(loss <= lmin + 1e-12 * max(1.0, abs(lmin))))
        if best is None or loss[i] < best[0] - 1e-12 * max(1.0, abs(best[0])):
            best = (float(loss[i]), f, float(0.5 * (xs[i - 1] + xs[i])))
    return best


def _grow(X, r, tau, depth, hp) -> TreeNode:
    loss, q = _leaf_loss(r, tau)
    if depth >= hp.max_depth:
        return TreeNode(value=q)
    split = _best_split(X, r, tau, hp.min_leaf)
    if split is None or not split[0] < loss - 1e-12 * max(1.0, abs(loss)):
        return TreeNode(value=q)
    _, f, thr = split
    go = X[:, f] <= thr
    return TreeNode(
        feature=f,
        threshold=thr,
        left=_grow(X[go], r[go], tau, depth + 1, hp),
        right=_grow(X[~go], r[~go], tau, depth + 1, hp),
    )


@dataclass(frozen=True)
class QuantileEnsemble:
    tau: float
    base: float
    trees: tuple[TreeNode, ...]
    learning_rate: float
    train_loss: tuple[float, ...] = ()

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(X.shape[0], self.base)
        for t in self.trees:
            out = out + self.learning_rate * t.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "base": self.base,
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees],
        }


def _as_matrix(X):
    X = np.asarray(getattr(X, "data", X), dtype=float)
    return X[:, None] if X.ndim == 1 else X


def fit_qgbrt(X, y, tau: float, hp: BoostHyperparams | None = None) -> QuantileEnsemble:
    """Boosted ensemble for one quantile level."""
    hp = hp or BoostHyperparams()
    if not 0.0 < tau < 1.0:
        raise DomainError(f"quantile level {tau} outside (0, 1)")
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.size:
        raise SchemaError(f"X has {X.shape[0]} rows, y has {y.size}")
    if y.size < 2 * hp.min_leaf:
        raise PreconditionError(f"{y.size} rows, need at least {2 * hp.min_leaf}")
    rng = np.random.default_rng(hp.seed)
    base = empirical_quantile(y, tau)
    F = np.full(y.size, base)
    losses = [float(np.sum(pinball(y, F, tau)))]
    trees = []
    for _ in range(hp.n_trees):
        r = y - F
        if hp.row_subsample < 1.0:
            take = np.sort(rng.choice(y.size, max(2 * hp.min_leaf, int(round(hp.row_subsample * y.size))),
                                      replace=False))
            tree = _grow(X[take], r[take], tau, 0, hp)
        else:
            tree = _grow(X, r, tau, 0, hp)
        trees.append(tree)
        F = F + hp.learning_rate * tree.predict(X)
        losses.append(float(np.sum(pinball(y, F, tau))))
    return QuantileEnsemble(tau, base, tuple(trees), hp.learning_rate, tuple(losses))


@dataclass(frozen=True)
class QgbrtFit:
    taus: TauGrid
    ensembles: tuple[QuantileEnsemble, ...]
    hp: BoostHyperparams = field(default_factory=BoostHyperparams)
    n_features: int = 0

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus.taus),
            "hyperparams": {k: getattr(self.hp, k) for k in self.hp.__dataclass_fields__},
            "ensembles": [e.to_dict() for e in self.ensembles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fit_qgbrt_grid(X, y, taus: TauGrid | None = None, hp: BoostHyperparams | None = None) -> QgbrtFit:
    taus = taus or TauGrid.default()
    hp = hp or BoostHyperparams()
    X = _as_matrix(X)
    ens = tuple(fit_qgbrt(X, y, t, hp) for t in taus)
    return QgbrtFit(taus, ens, hp, X.shape[1])


def predict_qgbrt(fit: QgbrtFit, X_next, taus: TauGrid | None = None) -> QuantileForecast:
    x = np.atleast_1d(np.asarray(X_next, dtype=float))
    if x.size != fit.n_features:
        raise SchemaError(f"X_next has {x.size} values, fit expects {fit.n_features}")
    ens: Sequence[QuantileEnsemble] = fit.ensembles
    grid = fit.taus
    if taus is not None:
        ens = [fit.ensembles[fit.taus.index(t)] for t in taus]
        grid = taus
    raw = np.array([e.predict(x[None, :])[0] for e in ens])
    return QuantileForecast(grid, monotone_rearrange(raw))
