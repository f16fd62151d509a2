"""Discrepancy series, the rolling-OLS pseudo predictor and predictor matrices."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataio import YearlyCountSeries, YearlyFeature, zscore_standardize
from .errors import AlignmentError, ConfigurationError, DomainError, InsufficientHistoryError
from .numerics import ols_fit

log = logging.getLogger(__name__)

PP_NAME = "PP"
DEFAULT_WINDOW = 29
MIN_PAIRS = 5
LAG_SUFFIX = "_lag1"


@dataclass(frozen=True)
class PseudoPredictor:
    values: YearlyFeature
    coeffs: Mapping[int, tuple[float, float]]
    window_len: int = DEFAULT_WINDOW


@dataclass(frozen=True)
class PredictorMatrix:
    years: tuple[int, ...]
    columns: tuple[str, ...]
    data: np.ndarray
    set_kind: str = "baseline"
    dropped: tuple[int, ...] = field(default=())

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(len(self.years), len(self.columns))
        if np.isnan(data).any():
            raise DomainError("predictor matrix holds NaN cells")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return len(self.years)

    def row(self, year: int) -> np.ndarray:
        return self.data[self.years.index(year)]

    def rows(self, years: Iterable[int]) -> np.ndarray:
        idx = [self.years.index(y) for y in years]
        return self.data[idx]

    def select(self, years: Iterable[int]) -> "PredictorMatrix":
        years = tuple(y for y in years if y in self.years)
        return PredictorMatrix(years, self.columns, self.rows(years), self.set_kind)

    def to_csv(self) -> str:
        lines = [",".join(("year",) + self.columns)]
        for y, r in zip(self.years, self.data):
            lines.append(",".join([str(y)] + [repr(float(v)) for v in r]))
        return "\n".join(lines) + "\n"


def compute_discrepancy(espi_std: YearlyFeature, counts_std: YearlyFeature) -> YearlyFeature:
    """``DIS_t = ESPI~_t - NH~_t`` on the years both inputs cover."""
    common = sorted(set(espi_std.years) & set(counts_std.years))
    if not common:
        raise AlignmentError("standardised ESPI and counts share no year")
    return YearlyFeature("DIS", {y: espi_std[y] - counts_std[y] for y in common})


def _pp_pairs(counts: YearlyCountSeries, dis: YearlyFeature, target_year: int, window_len: int):
    nh = counts.as_dict()
    s_years = [s for s in sorted(nh) if s < target_year and (s - 1) in dis]
    return s_years[-window_len:], nh


def compute_pp(
    counts: YearlyCountSeries,
    dis: YearlyFeature,
    target_year: int,
    window_len: int = DEFAULT_WINDOW,
    min_pairs: int = MIN_PAIRS,
) -> tuple[float, tuple[float, float]]:
    """Pseudo predictor for ``target_year``.

    Regresses counts ``NH_s`` on ``DIS_{s-1}`` over the last ``window_len``
    years ``s < target_year`` (or all of them when fewer exist, provided
    there are at least ``min_pairs``) and evaluates the fit at
    ``DIS_{target_year-1}``.
    """
    if (target_year - 1) not in dis:
        raise InsufficientHistoryError(f"DIS_{target_year - 1} is not available")
    s_years, nh = _pp_pairs(counts, dis, target_year, window_len)
    if len(s_years) < min_pairs:
        raise InsufficientHistoryError(
            f"PP for {target_year}: {len(s_years)} usable pairs, need {min_pairs}"
        )
    x = np.array([dis[s - 1] for s in s_years])
    y = np.array([nh[s] for s in s_years], dtype=float)
    fit = ols_fit(np.column_stack([np.ones_like(x), x]), y)
    b0, b1 = float(fit.beta[0]), float(fit.beta[1])
    return b0 + b1 * dis[target_year - 1], (b0, b1)


def pseudo_predictor_series(
    counts: YearlyCountSeries,
    dis: YearlyFeature,
    years: Iterable[int],
    window_len: int = DEFAULT_WINDOW,
    min_pairs: int = MIN_PAIRS,
) -> PseudoPredictor:
    """PP for each requested year that has enough history; others are skipped."""
    vals, coeffs = {}, {}
    for t in years:
        try:
            vals[t], coeffs[t] = compute_pp(counts, dis, t, window_len, min_pairs)
        except InsufficientHistoryError:
            continue
    return PseudoPredictor(YearlyFeature(PP_NAME, vals), coeffs, window_len)


def fold_pseudo_predictor(
    counts: YearlyCountSeries,
    espi: YearlyFeature,
    last_train_year: int,
    window_len: int = DEFAULT_WINDOW,
    min_pairs: int = MIN_PAIRS,
) -> PseudoPredictor:
    """PP series for every year up to ``last_train_year + 1``.

    Only data from years ``<= last_train_year`` is read: both series are
    truncated, then standardised with moments of the common years in that
    window, so the value for the forecast year carries no look-ahead.
    """
    counts = counts.truncate(last_train_year)
    espi = espi.truncate(last_train_year)
    nh = counts.to_feature()
    common = sorted(set(nh.years) & set(espi.years))
    if len(common) < 2:
        raise InsufficientHistoryError("fewer than two years where ESPI and counts overlap")
    window = (common[0], common[-1])
    dis = compute_discrepancy(
        zscore_standardize(espi, window, common), zscore_standardize(nh, window, common)
    )
    years = range(common[0] + 1, last_train_year + 2)
    return pseudo_predictor_series(counts, dis, years, window_len, min_pairs)


def lagged(feature: YearlyFeature, lag: int = 1) -> YearlyFeature:
    """Shift so the value at year t is the input's value at year t-lag."""
    return YearlyFeature(f"{feature.name}{LAG_SUFFIX if lag == 1 else f'_lag{lag}'}",
                         {y + lag: v for y, v in feature.values.items()})


def build_predictor_matrix(
    features: Sequence[YearlyFeature] | Mapping[str, YearlyFeature],
    set_kind: str,
    year_range: tuple[int, int] | Iterable[int],
    baseline: Sequence[str] = ("li_sd", "zt500_mean"),
) -> PredictorMatrix:
    """Assemble the baseline or enhanced regressor matrix.

    ``features`` are unlagged yearly series. The baseline columns are taken
    at year t-1; the enhanced set adds the pseudo predictor (named ``PP``)
    at year t, since PP_t is itself built from year t-1 information.
    Rows with a missing cell are dropped with a warning.
    """
    if set_kind not in ("baseline", "enhanced"):
        raise ConfigurationError(f"unknown predictor set {set_kind!r}")
    by_name = dict(features) if isinstance(features, Mapping) else {f.name: f for f in features}
    cols: list[YearlyFeature] = []
    for name in baseline:
        if name not in by_name:
            raise ConfigurationError(f"predictor column {name!r} not provided")
        cols.append(lagged(by_name[name]))
    if set_kind == "enhanced":
        if PP_NAME not in by_name:
            raise ConfigurationError("enhanced set requested without a PP column")
        cols.append(by_name[PP_NAME])

    if isinstance(year_range, tuple) and len(year_range) == 2:
        years = list(range(year_range[0], year_range[1] + 1))
    else:
        years = sorted(year_range)
    kept, dropped, rows = [], [], []
    for y in years:
        if all(y in c for c in cols):
            kept.append(y)
            rows.append([c[y] for c in cols])
        else:
            dropped.append(y)
    if dropped:
        log.warning("%s matrix: dropped %d rows with missing cells: %s", set_kind, len(dropped), dropped)
    data = np.array(rows, dtype=float).reshape(len(kept), len(cols))
    return PredictorMatrix(tuple(kept), tuple(c.name for c in cols), data, set_kind, tuple(dropped))
