"""Readers for the yearly hurricane-count CSV and NOAA PSL monthly index files.

Also yearly aggregation of monthly indices and z-scoring with moments taken
from an explicit fitting window, so that callers can avoid look-ahead.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    AggregationError,
    ContiguityError,
    DegenerateSeriesError,
    DomainError,
    ParseError,
)

DEFAULT_SENTINEL = -99.99


@dataclass(frozen=True)
class YearlyCountSeries:
    years: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        years = tuple(int(y) for y in self.years)
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "counts", counts)
        if len(years) != len(counts):
            raise DomainError("years and counts differ in length")
        if len(years) < 2:
            raise DomainError("a count series needs at least two years")
        for a, b in zip(years, years[1:]):
            if b == a:
                raise ContiguityError(f"duplicate year {a}")
            if b != a + 1:
                raise ContiguityError(f"years not contiguous: {a} followed by {b}")
        for y, c in zip(years, counts):
            if c < 0:
                raise DomainError(f"negative count {c} in {y}")

    def __len__(self) -> int:
        return len(self.years)

    @property
    def first_year(self) -> int:
        return self.years[0]

    @property
    def last_year(self) -> int:
        return self.years[-1]

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.years, self.counts))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    def truncate(self, last_year: int) -> "YearlyCountSeries":
        keep = [i for i, y in enumerate(self.years) if y <= last_year]
        return YearlyCountSeries(
            tuple(self.years[i] for i in keep), tuple(self.counts[i] for i in keep)
        )

    def to_feature(self, name: str = "NH") -> "YearlyFeature":
        return YearlyFeature(name, dict(zip(self.years, map(float, self.counts))))


@dataclass(frozen=True)
class MonthlyIndexSeries:
    """Monthly values per year; missing cells are stored as NaN."""

    name: str
    rows: Mapping[int, tuple[float, ...]]
    missing_sentinel: float = DEFAULT_SENTINEL

    def __post_init__(self):
        rows = {}
        for year, vals in sorted(self.rows.items()):
            vals = tuple(float(v) for v in vals)
            if len(vals) != 12:
                raise ParseError(f"{self.name}: year {year} has {len(vals)} values, expected 12")
            rows[int(year)] = vals
        object.__setattr__(self, "rows", rows)

    @property
    def years(self) -> list[int]:
        return list(self.rows)

    def values(self, year: int) -> np.ndarray:
        return np.asarray(self.rows[year], dtype=float)


@dataclass(frozen=True)
class YearlyFeature:
    name: str
    values: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        vals = {}
        for year, v in sorted(self.values.items()):
            v = float(v)
            if not math.isfinite(v):
                raise DomainError(f"{self.name}: non-finite value in {year}")
            vals[int(year)] = v
        object.__setattr__(self, "values", vals)

    @property
    def years(self) -> list[int]:
        return list(self.values)

    def __getitem__(self, year: int) -> float:
        return self.values[year]

    def __contains__(self, year: int) -> bool:
        return year in self.values

    def restrict(self, years: Iterable[int]) -> "YearlyFeature":
        return YearlyFeature(self.name, {y: self.values[y] for y in years if y in self.values})

    def truncate(self, last_year: int) -> "YearlyFeature":
        return YearlyFeature(self.name, {y: v for y, v in self.values.items() if y <= last_year})

    def renamed(self, name: str) -> "YearlyFeature":
        return YearlyFeature(name, self.values)


def _lines(text) -> Iterable[str]:
    if hasattr(text, "read"):
        text = text.read()
    return io.StringIO(text).read().splitlines()


def parse_counts_csv(text) -> YearlyCountSeries:
    """Parse ``year,count`` rows. A leading ``year,count`` header is optional."""
    years, counts = [], []
    seen_data = False
    for lineno, raw in enumerate(_lines(text), start=1):
        line = raw.strip().lstrip("﻿")
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if not seen_data and [p.lower() for p in parts] == ["year", "count"]:
            continue
        seen_data = True
        if len(parts) != 2:
            raise ParseError(f"expected 'year,count', got {raw!r}", lineno)
        try:
            year = int(parts[0])
            count = float(parts[1])
        except ValueError:
            raise ParseError(f"non-numeric field in {raw!r}", lineno) from None
        if count != int(count):
            raise ParseError(f"count must be an integer, got {parts[1]!r}", lineno)
        if count < 0:
            raise DomainError(f"line {lineno}: negative count {parts[1]} for {year}")
        if years and year in years:
            raise ContiguityError(f"line {lineno}: duplicate year {year}")
        years.append(year)
        counts.append(int(count))
    if len(years) < 2:
        raise ParseError("need at least two data rows")
    return YearlyCountSeries(tuple(years), tuple(counts))


def format_counts_csv(series: YearlyCountSeries) -> str:
    body = "".join(f"{y},{c}\n" for y, c in zip(series.years, series.counts))
    return "year,count\n" + body


def parse_monthly_index(text, sentinel: float = DEFAULT_SENTINEL, name: str = "index") -> MonthlyIndexSeries:
    """Parse the NOAA PSL monthly layout: ``year v1 ... v12`` per line.

    The optional first line holding just the start and end years and the
    footer that PSL appends after a sentinel-only line are skipped. Cells
    equal to ``sentinel`` become NaN.
    """
    rows: dict[int, tuple[float, ...]] = {}
    lines = list(_lines(text))
    started = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if not started and not rows and len(tokens) == 2 and all(t.lstrip("-").isdigit() for t in tokens):
            started = True
            continue
        started = True
        if len(tokens) == 1 and rows:
            try:
                if math.isclose(float(tokens[0]), sentinel):
                    break  # PSL footer follows
            except ValueError:
                pass
        try:
            year = int(tokens[0])
        except ValueError:
            raise ParseError(f"expected a year, got {tokens[0]!r}", lineno) from None
        if len(tokens) != 13:
            raise ParseError(f"year {year} has {len(tokens) - 1} monthly values, expected 12", lineno)
        vals = []
        for tok in tokens[1:]:
            try:
                v = float(tok)
            except ValueError:
                raise ParseError(f"non-numeric token {tok!r}", lineno) from None
            if math.isclose(v, sentinel, rel_tol=0.0, abs_tol=1e-9 * max(1.0, abs(sentinel))):
                v = math.nan
            elif not math.isfinite(v):
                raise ParseError(f"non-finite token {tok!r}", lineno)
            vals.append(v)
        if year in rows:
            raise ParseError(f"duplicate year {year}", lineno)
        rows[year] = tuple(vals)
    if not rows:
        raise ParseError("no data rows found")
    return MonthlyIndexSeries(name=name, rows=rows, missing_sentinel=sentinel)


def yearly_aggregate(series: MonthlyIndexSeries, stat: str = "mean", name: str | None = None) -> YearlyFeature:
    """Collapse each year's non-missing months to their mean or sample stddev."""
    if stat not in ("mean", "stddev"):
        raise DomainError(f"unknown statistic {stat!r}")
    need = 1 if stat == "mean" else 2
    out = {}
    for year, vals in series.rows.items():
        v = np.asarray(vals, dtype=float)
        v = v[~np.isnan(v)]
        if v.size < need:
            raise AggregationError(
                f"{series.name}: year {year} has {v.size} non-missing months, {stat} needs {need}",
                year=year,
            )
        out[year] = float(v.mean()) if stat == "mean" else float(v.std(ddof=1))
    return YearlyFeature(name or f"{series.name}_{stat}", out)


def zscore_standardize(values: YearlyFeature, fit_window: tuple[int, int], years: Iterable[int] | None = None) -> YearlyFeature:
    """Standardise with mean and sample stddev from ``fit_window`` only.

    ``fit_window`` is an inclusive ``(first, last)`` year range; the moments
    are applied to every year of ``values`` (or to ``years`` if given).
    """
    lo, hi = fit_window
    window = np.array([v for y, v in values.values.items() if lo <= y <= hi])
    if window.size < 2:
        raise DomainError(f"{values.name}: fit window {lo}-{hi} holds {window.size} values, need 2")
    mu = window.mean()
    sd = window.std(ddof=1)
    if not sd > 1e-12 * max(1.0, abs(mu)):
        raise DegenerateSeriesError(f"{values.name}: zero variance over {lo}-{hi}")
    keep = values.years if years is None else [y for y in years if y in values]
    return YearlyFeature(values.name, {y: (values[y] - mu) / sd for y in keep})


def load_counts(path) -> YearlyCountSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_counts_csv(fh.read())


def load_monthly_index(path, sentinel: float = DEFAULT_SENTINEL, name: str = "index") -> MonthlyIndexSeries:
    with open(path, encoding="utf-8") as fh:
        return parse_monthly_index(fh.read(), sentinel=sentinel, name=name)
