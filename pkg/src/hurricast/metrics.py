"""Forecast scores: MAE, directional accuracy, average pinball loss and PIT."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, SchemaError
from .numerics import pinball
from .qr import SMALL_TAUS, QuantileForecast, TauGrid


def mae(actuals, forecasts) -> float:
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape or a.size < 1:
        raise SchemaError(f"length mismatch or empty input: {a.shape} vs {f.shape}")
    return float(np.mean(np.abs(f - a)))


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5)


def directional_accuracy(actuals, forecasts, reference: str = "forecast") -> float:
    """Share of steps where forecast and actual move in the same direction.

    ``reference="forecast"`` compares ``sign(f_i - f_{i-1})`` with
    ``sign(y_i - y_{i-1})``. ``reference="actual"`` uses ``sign(f_i -
    y_{i-1})`` instead, a common variant reported here only as an
    alternative. ``sign(0) = 0``, so a flat step only matches a flat step.
    """
    a = np.asarray(actuals, dtype=float)
    f = np.asarray(forecasts, dtype=float)
    if a.shape != f.shape:
        raise SchemaError(f"length mismatch: {a.shape} vs {f.shape}")
    if a.size < 2:
        raise SchemaError("directional accuracy needs at least two points")
    da = np.sign(np.diff(a))
    if reference == "forecast":
        df = np.sign(np.diff(f))
    elif reference == "actual":
        df = np.sign(f[1:] - a[:-1])
    else:
        raise DomainError(f"unknown reference {reference!r}")
    return float(np.mean(da == df))


def aplf(actuals, quantile_forecasts: Sequence[QuantileForecast], grid: TauGrid | None = None):
    """Average pinball loss: mean over tau per year, then mean over years.

    Returns ``(overall, per_year)``. With ``grid`` given, each curve is
    restricted to those levels first.
    """
    a = np.asarray(actuals, dtype=float)
    if a.size != len(quantile_forecasts) or a.size == 0:
        raise SchemaError("need exactly one quantile curve per actual")
    per_year = []
    ref = None
    for y, qf in zip(a, quantile_forecasts):
        if grid is not None:
            qf = qf.restrict(grid)
        if ref is None:
            ref = qf.taus.taus
        elif qf.taus.taus != ref:
            raise SchemaError("quantile grids differ across years")
        taus = np.asarray(qf.taus.taus)
        per_year.append(float(np.mean(pinball(y, qf.values, taus))))
    per_year = np.asarray(per_year)
    return float(per_year.mean()), per_year


@dataclass(frozen=True)
class PitValue:
    value: float
    clamped: bool = False


def pit_value(actual: float, qf: QuantileForecast) -> PitValue:
    """Forecast CDF at ``actual`` by linear interpolation between quantile knots.

    Repeated knot values form an atom; an actual landing exactly on one gets
    the midpoint of the tau range it spans. Outside the forecast range the
    value is clamped to the extreme levels and flagged.
    """
    q = np.asarray(qf.values, dtype=float)
    t = np.asarray(qf.taus.taus, dtype=float)
    if np.any(np.diff(q) < 0):
        raise DomainError("quantile curve is not monotone")
    x = float(actual)
    if x < q[0]:
        return PitValue(float(t[0]), True)
    if x > q[-1]:
        return PitValue(float(t[-1]), True)
    uq, first = np.unique(q, return_index=True)
    last = np.r_[first[1:] - 1, q.size - 1]
    lo_tau, hi_tau = t[first], t[last]
    i = int(np.searchsorted(uq, x))
    if i < uq.size and uq[i] == x:
        return PitValue(float(0.5 * (lo_tau[i] + hi_tau[i])))
    # uq[i-1] < x < uq[i]
    x0, x1 = uq[i - 1], uq[i]
    y0, y1 = hi_tau[i - 1], lo_tau[i]
    return PitValue(float(y0 + (y1 - y0) * (x - x0) / (x1 - x0)))


def pit_uniformity(pits) -> tuple[float, float]:
    """Mean PIT and sup distance of the empirical PIT CDF from the uniform CDF."""
    p = np.sort(np.asarray(pits, dtype=float))
    n = p.size
    i = np.arange(1, n + 1)
    dist = max(np.max(i / n - p), np.max(p - (i - 1) / n))
    return float(p.mean()), float(dist)


@dataclass
class MetricReport:
    mae: float
    mae_rounded: float
    da: float
    aplf_small_grid: float
    aplf_full_grid: float
    pinball_by_year: dict = field(default_factory=dict)
    pit: dict = field(default_factory=dict)
    pit_clamped: dict = field(default_factory=dict)
    da_vs_last_actual: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def score(years, actuals, points, quantile_forecasts: Sequence[QuantileForecast]) -> MetricReport:
    """All headline metrics for one model over the test years."""
    years = list(years)
    full = quantile_forecasts[0].taus
    try:
        small = full.subgrid(SMALL_TAUS)
    except KeyError:
        small = full
    overall_full, per_full = aplf(actuals, quantile_forecasts)
    overall_small, _ = aplf(actuals, quantile_forecasts, small)
    pits = [pit_value(a, qf) for a, qf in zip(actuals, quantile_forecasts)]
    da = directional_accuracy(actuals, points) if len(years) >= 2 else float("nan")
    da_alt = directional_accuracy(actuals, points, "actual") if len(years) >= 2 else None
    return MetricReport(
        mae=mae(actuals, points),
        mae_rounded=mae(actuals, round_half_up(points)),
        da=da,
        aplf_small_grid=overall_small,
        aplf_full_grid=overall_full,
        pinball_by_year={int(y): float(v) for y, v in zip(years, per_full)},
        pit={int(y): p.value for y, p in zip(years, pits)},
        pit_clamped={int(y): p.clamped for y, p in zip(years, pits)},
        da_vs_last_actual=da_alt,
    )
