"""Synthetic sentiment panels with planted lead-lag couplings."""

import datetime as dt

import numpy as np

from .panel import SentimentPanel

TECH_TICKERS = (
    "AAPL", "MSFT", "NVDA", "GOOGL", "TSLA", "META", "AMZN", "V", "MA", "ADBE",
    "PYPL", "CRM", "CSCO", "INTC", "AVGO", "ORCL", "ACN", "AMD", "TXN", "QCOM",
    "INTU", "NOW", "IBM", "SPGI", "AMAT", "ADP", "ADI", "LRCX", "SQ", "MU",
    "MCO", "FI", "FIS", "MCHP",
)


def business_days(start, n):
    """``n`` consecutive weekdays from ``start``."""
    out = []
    d = start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def make_panel(
    n_series=34,
    n_obs=1319,
    psi1=0.3,
    sigma=0.3,
    couplings=None,
    seed=0,
    start=dt.date(2019, 9, 30),
    tickers=None,
    missing=0.0,
):
    """Vector AR(1) panel squashed into ``(-1, 1)`` with ``tanh``.

    Args:
        couplings: ``{(src, dst): coef}`` adds ``coef * x_src[t-1]`` to
            ``x_dst[t]`` (indices or tickers).
        missing: fraction of cells (never in the first row) set missing, or
            a per-column sequence of fractions.
    """
    rng = np.random.default_rng(seed)
    if tickers is None:
        tickers = TECH_TICKERS[:n_series] if n_series <= len(TECH_TICKERS) else [f"S{i:02d}" for i in range(n_series)]
    tickers = list(tickers)
    pos = {t: i for i, t in enumerate(tickers)}
    a = np.eye(n_series) * psi1
    for (s, d), c in (couplings or {}).items():
        a[pos.get(d, d), pos.get(s, s)] += c
    x = np.zeros((n_obs, n_series))
    eps = rng.standard_normal((n_obs, n_series)) * sigma
    x[0] = eps[0]
    for t in range(1, n_obs):
        x[t] = a @ x[t - 1] + eps[t]
    values = np.tanh(x)

    frac = np.broadcast_to(np.asarray(missing, dtype=float), (n_series,))
    if np.any(frac > 0):
        for j in range(n_series):
            m = int(round(frac[j] * n_obs))
            if m:
                rows = rng.choice(np.arange(1, n_obs), size=m, replace=False)
                values[rows, j] = np.nan
    return SentimentPanel(business_days(start, n_obs), tickers, values)


def hub_couplings(hub, followers, coef=0.6):
    """One source driving several followers."""
    return {(hub, f): coef for f in followers}
