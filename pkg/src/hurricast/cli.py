"""Command-line entry point.

``hurricast backtest`` reads the count file and the monthly index files,
runs the expanding-window backtest for the requested models and writes
JSON/CSV artifacts. ``hurricast features`` exports the predictor matrices.

Every artifact carries the digest of the effective configuration and the
SHA-256 of each input file. All outputs are staged in a temporary directory
and moved into place only after the whole run succeeded. Failures print a
single JSON object on stderr and exit with status 1; bad usage exits with 2.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import (
    MODEL_KINDS,
    PREDICTOR_SETS,
    BacktestData,
    ModelSpec,
    SplitPlan,
    compare_with_published,
    pp_count_correlation,
    run_expanding_backtest,
)
from .dataio import DEFAULT_SENTINEL, load_counts, load_monthly_index, yearly_aggregate
from .errors import ConfigurationError, HurricastError
from .features import PP_NAME, build_predictor_matrix, fold_pseudo_predictor
from .qr import TauGrid

log = logging.getLogger("hurricast")

# yearly statistic and feature name for each known monthly index
INDEX_AGGREGATION = {
    "espi": ("mean", "espi_mean"),
    "li": ("stddev", "li_sd"),
    "zt500": ("mean", "zt500_mean"),
}
DEFAULT_BASELINE = ("li_sd", "zt500_mean")
PP_SOURCE = "espi"


@dataclass(frozen=True)
class RunConfig:
    counts: str
    indices: dict[str, str]
    missing: float = DEFAULT_SENTINEL
    models: tuple[str, ...] = MODEL_KINDS
    predictors: tuple[str, ...] = PREDICTOR_SETS
    taus: tuple[float, ...] = field(default_factory=lambda: TauGrid.default().taus)
    test_years: str | None = None
    seed: int = 0
    baseline: tuple[str, ...] = DEFAULT_BASELINE
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        for path in [self.counts, *self.indices.values()]:
            if not Path(path).is_file():
                raise ConfigurationError(f"input file not found: {path}")
        for m in self.models:
            if m not in MODEL_KINDS:
                raise ConfigurationError(f"unknown model {m!r}; choose from {', '.join(MODEL_KINDS)}")
        for p in self.predictors:
            if p not in PREDICTOR_SETS:
                raise ConfigurationError(f"unknown predictor set {p!r}")
        if "enhanced" in self.predictors and PP_SOURCE not in self.indices:
            raise ConfigurationError("the enhanced predictor set needs --index espi=<path>")

    def digest_payload(self) -> dict:
        """Everything that can change a result; paths and worker count are excluded."""
        d = asdict(self)
        for k in ("counts", "indices", "out", "workers"):
            d.pop(k)
        d["index_names"] = sorted(self.indices)
        d["version"] = __version__
        return d

    def digest(self) -> str:
        return _sha256(json.dumps(self.digest_payload(), sort_keys=True).encode())


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _index_arg(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError(f"expected NAME=PATH, got {text!r}")
    return name.strip(), path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hurricast", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--counts", required=True, help="CSV of year,count")
        p.add_argument("--index", action="append", type=_index_arg, default=[], metavar="NAME=PATH",
                       help="monthly index file (repeatable); known names: espi, li, zt500")
        p.add_argument("--missing", type=float, default=DEFAULT_SENTINEL,
                       help="missing-value sentinel in index files (default %(default)s)")
        p.add_argument("--baseline", type=_csv_list, default=DEFAULT_BASELINE,
                       help="baseline feature columns, lagged one year (default li_sd,zt500_mean)")
        p.add_argument("-v", "--verbose", action="store_true")

    bt = sub.add_parser("backtest", help="run the expanding-window backtest")
    common(bt)
    bt.add_argument("--models", type=_csv_list, default=MODEL_KINDS)
    bt.add_argument("--predictors", type=_csv_list, default=PREDICTOR_SETS)
    bt.add_argument("--taus", type=TauGrid.parse, default=TauGrid.default(),
                    help="comma-separated quantile levels")
    bt.add_argument("--test-years", default=None,
                    help="FIRST-LAST test years (default: the last 11 years of counts)")
    bt.add_argument("--seed", type=int, default=0)
    bt.add_argument("--out", default="results")
    bt.add_argument("--workers", type=int, default=1, help="processes for the fold loop")
    bt.add_argument("--no-timestamp", action="store_true",
                    help="omit the generation time so reruns are byte-identical")

    ft = sub.add_parser("features", help="export the predictor matrices as CSV")
    common(ft)
    ft.add_argument("--last-train-year", type=int, default=None,
                    help="build the pseudo predictor from data up to this year (default: last count year - 1)")
    ft.add_argument("--out", default="features.csv")
    return ap


# -- loading ------------------------------------------------------------------

def load_inputs(counts_path: str, indices: dict[str, str], missing: float):
    counts = load_counts(counts_path)
    features, espi = {}, None
    for name, path in sorted(indices.items()):
        stat, fname = INDEX_AGGREGATION.get(name, ("mean", f"{name}_mean"))
        series = load_monthly_index(path, missing, name)
        feat = yearly_aggregate(series, stat, fname)
        features[fname] = feat
        if name == PP_SOURCE:
            espi = yearly_aggregate(series, "mean", PP_SOURCE)
    return counts, features, espi


def input_digests(counts_path: str, indices: dict[str, str]) -> dict[str, str]:
    out = {"counts": _sha256(Path(counts_path).read_bytes())}
    for name, path in sorted(indices.items()):
        out[name] = _sha256(Path(path).read_bytes())
    return out


# -- artifact builders ------------------------------------------------------

def _provenance_line(prov: dict) -> str:
    inputs = ";".join(f"{k}={v}" for k, v in prov["input_digests"].items())
    return f"# config_sha256={prov['config_digest']} seed={prov['seed']} inputs={inputs}\n"


def _csv_text(prov: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write(_provenance_line(prov))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not np.isfinite(x)):
        return ""
    return repr(float(x))


def table2_rows(results):
    for r in results:
        m = r.metrics
        row = [r.spec.label, r.spec.predictor_set]
        if m is None:
            row += ["", "", "", "", ""]
        else:
            row += [_fmt(m.mae), _fmt(m.da), _fmt(m.aplf_small_grid), _fmt(m.aplf_full_grid), _fmt(m.mae_rounded)]
        row += [len(r.records), len(r.failures)]
        yield row


TABLE2_HEADER = ["model", "predictor_set", "MAE", "DA", "APLF", "APLF_full_grid", "MAE_rounded",
                 "n_folds", "n_failed"]


def mae_by_year_rows(results):
    for r in results:
        for rec in r.records:
            err = "" if not rec.ok else _fmt(abs(rec.point - rec.actual))
            yield [r.spec.label, rec.year, rec.actual, _fmt(rec.point) if rec.ok else "", err]


def quantile_rows(results):
    for r in results:
        for rec in r.records:
            if not rec.ok:
                continue
            for tau, v in zip(rec.quantiles.taus, rec.quantiles.values):
                yield [r.spec.label, rec.year, rec.actual, repr(tau), _fmt(v)]


def forecast_rows(results):
    for r in results:
        for rec in r.records:
            vals = [_fmt(v) for v in rec.quantiles.values] if rec.ok else []
            yield [r.spec.label, r.spec.predictor_set, rec.year, rec.actual,
                   _fmt(rec.point) if rec.ok else "", *vals]


def pit_rows(results):
    for r in results:
        if r.metrics is None:
            continue
        for year, v in r.metrics.pit.items():
            yield [r.spec.label, year, _fmt(v), int(r.metrics.pit_clamped[year])]


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if np.isfinite(v) else None
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def write_atomically(out_dir: Path, files: dict[str, str]) -> None:
    """Stage every file in a sibling temp dir, then rename each into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir))
    try:
        for name, text in files.items():
            (stage / name).write_text(text, encoding="utf-8")
        for name in files:
            os.replace(stage / name, out_dir / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


# -- commands -----------------------------------------------------------------

def cmd_backtest(args) -> int:
    cfg = RunConfig(
        counts=args.counts,
        indices=dict(args.index),
        missing=args.missing,
        models=tuple(args.models),
        predictors=tuple(args.predictors),
        taus=args.taus.taus,
        test_years=args.test_years,
        seed=args.seed,
        baseline=tuple(args.baseline),
        out=args.out,
        workers=args.workers,
    )
    counts, features, espi = load_inputs(cfg.counts, cfg.indices, cfg.missing)
    data = BacktestData(counts, features, espi, baseline=cfg.baseline)
    plan = SplitPlan.parse(cfg.test_years) if cfg.test_years else SplitPlan.last_n(counts)
    specs = [ModelSpec(m, p, seed=cfg.seed) for m in cfg.models for p in cfg.predictors]
    results = run_expanding_backtest(data, specs, plan, TauGrid(cfg.taus), workers=cfg.workers)

    pp_corr = None
    if espi is not None:
        # restricted to the evaluation horizon so that later data cannot move it
        horizon = BacktestData(counts.truncate(plan.last_test_year), features, espi, baseline=cfg.baseline)
        pp_corr = pp_count_correlation(horizon)

    prov = {
        "config": cfg.digest_payload(),
        "config_digest": cfg.digest(),
        "input_digests": input_digests(cfg.counts, cfg.indices),
        "seed": cfg.seed,
    }
    report = {
        "provenance": prov,
        "methodology": methodology(data, cfg),
        "split": {"first_test_year": plan.first_test_year, "last_test_year": plan.last_test_year},
        "results": [r.to_dict() for r in results],
        "pp_count_correlation": pp_corr,
        "comparison_with_published": compare_with_published(results, pp_corr),
    }
    if not args.no_timestamp:
        report["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    files = {
        "report.json": json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n",
        "table2.csv": _csv_text(prov, TABLE2_HEADER, table2_rows(results)),
        "plot_mae_by_year.csv": _csv_text(prov, ["model", "year", "actual", "forecast", "abs_error"],
                                          mae_by_year_rows(results)),
        "plot_quantiles_by_year.csv": _csv_text(prov, ["model", "year", "actual", "tau", "quantile"],
                                                quantile_rows(results)),
        "pit_by_year.csv": _csv_text(prov, ["model", "year", "pit", "clamped"], pit_rows(results)),
        "forecasts.csv": _csv_text(prov, ["model", "predictor_set", "year", "actual", "point",
                                          *(f"q{t!r}" for t in cfg.taus)], forecast_rows(results)),
    }
    write_atomically(Path(cfg.out), files)
    for r in results:
        m = r.metrics
        summary = "all folds failed" if m is None else f"MAE={m.mae:.3f} DA={m.da:.2f} APLF={m.aplf_small_grid:.3f}"
        print(f"{r.spec.label:<11} {summary}")
    return 0


def cmd_features(args) -> int:
    indices = dict(args.index)
    for path in [args.counts, *indices.values()]:
        if not Path(path).is_file():
            raise ConfigurationError(f"input file not found: {path}")
    counts, features, espi = load_inputs(args.counts, indices, args.missing)
    last = args.last_train_year if args.last_train_year is not None else counts.last_year - 1
    feats = dict(features)
    kind = "baseline"
    if espi is not None:
        feats[PP_NAME] = fold_pseudo_predictor(counts, espi, last).values
        kind = "enhanced"
    pm = build_predictor_matrix(feats, kind, (counts.first_year, last + 1), tuple(args.baseline))
    prov = {
        "config_digest": _sha256(json.dumps({"last_train_year": last, "baseline": list(args.baseline),
                                             "missing": args.missing, "version": __version__},
                                            sort_keys=True).encode()),
        "input_digests": input_digests(args.counts, indices),
        "seed": 0,
    }
    nh = counts.as_dict()
    rows = [[y, nh.get(y, ""), *(repr(float(v)) for v in pm.row(y))] for y in pm.years]
    out = Path(args.out)
    write_atomically(out.parent if str(out.parent) else Path("."),
                     {out.name: _csv_text(prov, ["year", "count", *pm.columns], rows)})
    return 0


def methodology(data: BacktestData, cfg: RunConfig) -> dict:
    """Modelling choices that the results depend on, stated next to them."""
    return {
        "standardisation": "expanding: ESPI and count moments are re-estimated in every fold from years "
                           "up to the fold's last training year only",
        "pseudo_predictor": {"window": data.pp_window, "min_pairs": data.pp_min_pairs,
                             "regression": "counts_s on DIS_(s-1), DIS = z(ESPI mean) - z(counts)"},
        "baseline_columns": [f"{c}_lag1" for c in cfg.baseline],
        "arima": "regression with ARIMA errors; order by stepwise AICc search, d by KPSS",
        "ingarch_order": [1, 1],
        "point_forecast": "conditional mean (ARIMA, INGARCH); tau=0.5 quantile (QR, QGBRT)",
        "quantiles_for_point_models": "normal distribution centred on the forecast with the model's sd",
        "aplf_grids": {"APLF": [0.1, 0.5, 0.9], "APLF_full_grid": list(cfg.taus)},
        "directional_accuracy": "sign of forecast change vs sign of actual change; sign(0)=0",
    }


def _fail(exc: BaseException, code: int = 1) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "year"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    if getattr(exc, "diagnostics", None):
        payload["diagnostics"] = _jsonable(exc.diagnostics)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


class _Once(logging.Filter):
    """Drop repeats; every fold re-logs the same dropped-row notice."""

    def __init__(self):
        super().__init__()
        self.seen = set()

    def filter(self, record):
        key = record.getMessage()
        if key in self.seen:
            return False
        self.seen.add(key)
        return True


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler.addFilter(_Once())
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    log.propagate = False
    try:
        if args.command == "backtest":
            return cmd_backtest(args)
        return cmd_features(args)
    except (HurricastError, OSError, ValueError) as exc:
        return _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
