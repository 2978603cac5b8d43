"""Sentiment panels: CSV ingestion, descriptive statistics and AR(1) fits."""

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError, PanelParseError


@dataclass(frozen=True)
class SentimentPanel:
    """Aligned daily series, one column per ticker.

    ``values`` is a ``(T, n)`` float array with ``NaN`` marking missing
    observations.  Present values lie in ``[-1, 1]``.
    """

    dates: tuple
    tickers: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        if values.ndim != 2 or values.shape != (len(self.dates), len(self.tickers)):
            raise ValueError(
                f"values shape {values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not self.tickers:
            raise ValueError("panel has no tickers")
        if len(set(self.tickers)) != len(self.tickers):
            raise ValueError("tickers must be unique")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        present = values[~np.isnan(values)]
        if present.size and (present.min() < -1 or present.max() > 1):
            raise ValueError("present values must lie in [-1, 1]")

    @property
    def n_obs(self):
        return len(self.dates)

    @property
    def n_series(self):
        return len(self.tickers)

    def column(self, ticker):
        return self.values[:, self.tickers.index(ticker)]

    def missing_fraction(self):
        """Per-ticker fraction of missing observations."""
        return np.isnan(self.values).mean(axis=0)

    def is_complete(self):
        return not np.isnan(self.values).any()

    def slice(self, start, stop):
        """Rows ``start:stop`` as a new panel."""
        return SentimentPanel(self.dates[start:stop], self.tickers, self.values[start:stop])


def _parse_value(text, row, column):
    text = text.strip()
    if text == "":
        return math.nan
    try:
        v = float(text)
    except ValueError:
        raise PanelParseError(f"not a number: {text!r}", row, column) from None
    if not math.isfinite(v):
        raise PanelParseError(f"non-finite value: {text!r}", row, column)
    if v < -1 or v > 1:
        raise PanelParseError(f"value {v!r} outside [-1, 1]", row, column)
    return v


def load_panel(path):
    """Read a panel CSV with header ``date,TICKER1,...,TICKERn``.

    Empty cells become missing values.  Rows are sorted by date.

    Raises:
        PanelParseError: on malformed or duplicate dates, duplicate or empty
            tickers, non-numeric cells or values outside ``[-1, 1]``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelParseError("empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2:
            raise PanelParseError("need a date column and at least one ticker", row=1)
        tickers = header[1:]
        seen = set()
        for t in tickers:
            if not t:
                raise PanelParseError("empty ticker name", row=1)
            if t in seen:
                raise PanelParseError("duplicate ticker", row=1, column=t)
            seen.add(t)

        rows = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise PanelParseError(
                    f"expected {len(header)} fields, got {len(rec)}", row=lineno
                )
            try:
                date = dt.date.fromisoformat(rec[0].strip())
            except ValueError:
                raise PanelParseError(
                    f"malformed date {rec[0]!r}", row=lineno, column=header[0]
                ) from None
            if date in rows:
                raise PanelParseError(f"duplicate date {date}", row=lineno, column=header[0])
            rows[date] = [_parse_value(c, lineno, t) for c, t in zip(rec[1:], tickers)]

    dates = sorted(rows)
    values = np.array([rows[d] for d in dates], dtype=float).reshape(len(dates), len(tickers))
    return SentimentPanel(dates, tickers, values)


def save_panel(panel, path):
    """Write ``panel`` in the format read by :func:`load_panel`.

    Floats are written with ``repr`` so a round trip is bit-exact.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.values):
            w.writerow([d.isoformat(), *("" if math.isnan(v) else repr(float(v)) for v in row)])


@dataclass(frozen=True)
class StatsSummary:
    min: float
    max: float
    mean: float
    sd: float
    q25: float
    q75: float
    skewness: float
    kurtosis: float
    n_missing: int
    missing_fraction: float
    degenerate: bool = False


STATS_FIELDS = tuple(f.name for f in fields(StatsSummary))


def describe(series):
    """Summary statistics over the present values of one column.

    ``sd`` is the sample standard deviation; skewness is ``m3 / m2**1.5``
    and kurtosis is the excess ``m4 / m2**2 - 3``, both from central sample
    moments.  A constant series reports 0 for both with ``degenerate=True``.
    """
    x = np.asarray(series, dtype=float)
    present = x[~np.isnan(x)]
    if present.size < 2:
        raise InsufficientDataError(f"need at least 2 present values, got {present.size}")
    dev = present - present.mean()
    m2 = np.mean(dev**2)
    # m2**2 underflows for subnormal spreads; treat those as constant
    if m2**2 == 0:
        skew = kurt = 0.0
        degenerate = True
    else:
        skew = float(np.mean(dev**3) / m2**1.5)
        kurt = float(np.mean(dev**4) / m2**2 - 3.0)
        degenerate = False
    q25, q75 = np.quantile(present, [0.25, 0.75])
    n_missing = int(x.size - present.size)
    return StatsSummary(
        min=float(present.min()),
        max=float(present.max()),
        mean=float(present.mean()),
        sd=float(present.std(ddof=1)),
        q25=float(q25),
        q75=float(q75),
        skewness=skew,
        kurtosis=kurt,
        n_missing=n_missing,
        missing_fraction=n_missing / x.size,
        degenerate=degenerate,
    )


def write_stats(panel, path):
    """One CSV row per ticker with the :class:`StatsSummary` fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["ticker", *STATS_FIELDS])
        for j, t in enumerate(panel.tickers):
            s = describe(panel.values[:, j])
            w.writerow([t, *(repr(getattr(s, f)) if isinstance(getattr(s, f), float)
                             else getattr(s, f) for f in STATS_FIELDS)])


@dataclass(frozen=True)
class Ar1Fit:
    """``x_t = intercept + psi1 * x_{t-1} + e_t`` with ``sd(e_t) = sigma``."""

    intercept: float
    psi1: float
    sigma: float
    n_used: int

    def implied_variance(self):
        """Stationary variance ``sigma**2 / (1 - psi1**2)``; inf if non-stationary."""
        if abs(self.psi1) >= 1:
            return math.inf
        return self.sigma**2 / (1 - self.psi1**2)


def fit_ar1(series, min_length=10):
    """OLS fit of ``x_t`` on ``x_{t-1}`` over consecutive present pairs.

    Missing values may be present; only pairs where both ``x_{t-1}`` and
    ``x_t`` are observed enter the regression.  ``sigma`` is the residual
    standard deviation with ``n - 2`` degrees of freedom.
    """
    x = np.asarray(series, dtype=float)
    if x.size < min_length:
        raise InsufficientDataError(f"series length {x.size} < {min_length}")
    prev, curr = x[:-1], x[1:]
    ok = ~(np.isnan(prev) | np.isnan(curr))
    prev, curr = prev[ok], curr[ok]
    n = prev.size
    if n < min_length - 1:
        raise InsufficientDataError(f"only {n} consecutive present pairs")
    px = prev - prev.mean()
    sxx = px @ px
    if sxx == 0:
        raise DegenerateSeriesError("lagged series has zero variance")
    psi1 = (px @ (curr - curr.mean())) / sxx
    intercept = curr.mean() - psi1 * prev.mean()
    resid = curr - intercept - psi1 * prev
    sigma = math.sqrt(resid @ resid / (n - 2))
    return Ar1Fit(float(intercept), float(psi1), sigma, int(n))


def simulate_ar1(n, psi1, sigma, rng, intercept=0.0, burn_in=100):
    """Draw ``n`` values of a Gaussian AR(1), discarding ``burn_in`` first."""
    if abs(psi1) >= 1:
        raise ValueError(f"|psi1| must be < 1 for a stationary AR(1), got {psi1}")
    eps = rng.standard_normal(n + burn_in) * sigma
    x = np.empty(n + burn_in)
    x[0] = intercept / (1 - psi1) + eps[0] / math.sqrt(1 - psi1**2)
    for t in range(1, n + burn_in):
        x[t] = intercept + psi1 * x[t - 1] + eps[t]
    return x[burn_in:]
