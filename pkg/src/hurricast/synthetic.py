"""Synthetic stand-ins for the count and climate-index files.

The series are random but carry a known lagged dependence of the counts on
the indices, which is enough to exercise the full pipeline in tests and
demos. They are not climate data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import DEFAULT_SENTINEL, YearlyCountSeries, format_counts_csv


@dataclass(frozen=True)
class SyntheticBundle:
    counts: YearlyCountSeries
    monthly: dict[str, np.ndarray]   # name -> (n_years, 12)
    first_year: int

    def index_text(self, name: str, sentinel: float = DEFAULT_SENTINEL) -> str:
        return format_monthly_index(self.monthly[name], self.first_year, sentinel)

    def counts_text(self) -> str:
        return format_counts_csv(self.counts)

    def write(self, directory) -> dict[str, str]:
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {"counts": str(d / "counts.csv")}
        (d / "counts.csv").write_text(self.counts_text(), encoding="utf-8")
        for name in self.monthly:
            p = d / f"{name}.txt"
            p.write_text(self.index_text(name), encoding="utf-8")
            paths[name] = str(p)
        return paths

    def backtest_data(self):
        """Yearly features aggregated the same way as the command-line tool does."""
        from .backtest import BacktestData
        from .dataio import parse_monthly_index, yearly_aggregate

        def agg(name, stat, fname):
            return yearly_aggregate(parse_monthly_index(self.index_text(name), name=name), stat, fname)

        feats = {"li_sd": agg("li", "stddev", "li_sd"), "zt500_mean": agg("zt500", "mean", "zt500_mean")}
        return BacktestData(self.counts, feats, agg("espi", "mean", "espi_mean"))

    def with_fabricated_years(self, k: int = 5, seed: int = 99) -> "SyntheticBundle":
        """Append ``k`` years of wild, unrelated values to every series.

        Used by leakage audits: forecasts for the original years must not
        change.
        """
        rng = np.random.default_rng(seed)
        last = self.counts.last_year
        years = self.counts.years + tuple(range(last + 1, last + k + 1))
        counts = self.counts.counts + tuple(int(c) for c in rng.integers(0, 60, k))
        monthly = {name: np.vstack([arr, rng.normal(0.0, 25.0, (k, 12))]) for name, arr in self.monthly.items()}
        return SyntheticBundle(YearlyCountSeries(years, counts), monthly, self.first_year)


def format_monthly_index(values: np.ndarray, first_year: int, sentinel: float = DEFAULT_SENTINEL) -> str:
    """PSL layout: year range header, one row per year, sentinel footer."""
    values = np.asarray(values, dtype=float)
    last = first_year + values.shape[0] - 1
    lines = [f"{first_year:d} {last:d}"]
    for i, row in enumerate(values):
        cells = [f"{sentinel:.2f}" if np.isnan(v) else f"{v:.3f}" for v in row]
        lines.append(f"{first_year + i:d} " + " ".join(cells))
    lines.append(f"  {sentinel:.2f}")
    lines.append("  synthetic index (not observational data)")
    return "\n".join(lines) + "\n"


def make_bundle(first_year: int = 1981, last_year: int = 2022, seed: int = 0,
                missing_rate: float = 0.0) -> SyntheticBundle:
    """Counts driven by lagged index statistics plus Poisson noise."""
    rng = np.random.default_rng(seed)
    n = last_year - first_year + 1
    # one extra leading year so that every count year has a lagged predictor
    m = n + 1
    espi = rng.normal(0.0, 1.0, (m, 12)) + rng.normal(0.0, 0.8, (m, 1))
    li_scale = rng.uniform(0.4, 1.6, (m, 1))
    li = rng.normal(0.0, 1.0, (m, 12)) * li_scale
    zt = rng.normal(0.0, 0.3, (m, 12)) + np.linspace(-0.3, 0.4, m)[:, None]
    li_sd = li.std(axis=1, ddof=1)
    zt_mean = zt.mean(axis=1)
    espi_mean = espi.mean(axis=1)
    counts = np.empty(n, dtype=int)
    prev = 6.0
    for t in range(n):
        j = t + 1
        lam = np.exp(1.75 + 0.25 * (li_sd[j - 1] - 1.0) + 0.6 * zt_mean[j - 1]
                     - 0.25 * espi_mean[j - 1] + 0.02 * (prev - 6.0))
        counts[t] = rng.poisson(lam)
        prev = counts[t]
    if missing_rate > 0:
        for arr in (espi, li, zt):
            mask = rng.random(arr.shape) < missing_rate
            mask[:, :2] = False  # keep at least two months per year
            arr[mask] = np.nan
    years = tuple(range(first_year, last_year + 1))
    return SyntheticBundle(
        counts=YearlyCountSeries(years, tuple(int(c) for c in counts)),
        monthly={"espi": espi, "li": li, "zt500": zt},
        first_year=first_year - 1,
    )
