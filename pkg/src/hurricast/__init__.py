"""Seasonal Atlantic hurricane-count forecasting with a pseudo predictor.

Point models (regression with ARIMA errors, Poisson INGARCH) and quantile
models (linear quantile regression, quantile boosted trees) are compared in
an expanding-window backtest, with and without a pseudo predictor built from
the lagged discrepancy between an ENSO precipitation index and the counts.
"""

__version__ = "0.1.0"

import logging as _logging

_logging.getLogger(__name__).addHandler(_logging.NullHandler())

from .arima import ArimaFit, ArimaOrder, PointForecast, fit_arima, forecast_arima, select_arima_order
from .backtest import (
    BacktestData,
    ModelSpec,
    RunResult,
    SplitPlan,
    compare_with_published,
    normal_quantile_adapter,
    run_expanding_backtest,
)
from .dataio import (
    MonthlyIndexSeries,
    YearlyCountSeries,
    YearlyFeature,
    parse_counts_csv,
    parse_monthly_index,
    yearly_aggregate,
    zscore_standardize,
)
from .features import PredictorMatrix, build_predictor_matrix, compute_discrepancy, compute_pp
from .ingarch import IngarchFit, fit_ingarch, forecast_ingarch
from .metrics import MetricReport, aplf, directional_accuracy, mae, pit_value, score
from .qgbrt import BoostHyperparams, fit_qgbrt, fit_qgbrt_grid, predict_qgbrt
from .qr import QuantileForecast, TauGrid, fit_qr, fit_qr_grid, predict_qr

__all__ = [name for name in dir() if not name.startswith("_")]
