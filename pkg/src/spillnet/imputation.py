"""Exponential-decay imputation of missing sentiment observations.

A gap of length ``m`` following the last present value ``B`` is filled with
``B * exp(-rate * t) + eps_t`` for ``t = 1..m``; the decay clock restarts at
every present observation.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import _rng
from .errors import DataError, SpillnetError
from .panel import SentimentPanel, fit_ar1

NOISE_KINDS = ("none", "gaussian")
LEADING_FILL = ("error", "zero")


@dataclass(frozen=True)
class DecayConfig:
    """Settings for :func:`impute_decay`.

    ``sigma=None`` with gaussian noise means "estimate from an AR(1) fit of
    the series being imputed".
    """

    rate: float = 0.23
    noise: str = "gaussian"
    sigma: float | None = None
    seed: int = 0
    leading_fill: str = "error"

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"decay rate must be positive, got {self.rate}")
        if self.noise not in NOISE_KINDS:
            raise ValueError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.sigma is not None and self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.leading_fill not in LEADING_FILL:
            raise ValueError(f"leading_fill must be one of {LEADING_FILL}")


@dataclass(frozen=True)
class ImputationReport:
    n_imputed: int
    n_clamped: int
    sigma: float


def _fill(x, cfg, rng):
    x = np.array(x, dtype=float)
    missing = np.isnan(x)
    n_missing = int(missing.sum())
    if n_missing == 0:
        return x, 0
    sigma = 0.0
    if cfg.noise == "gaussian":
        sigma = fit_ar1(x).sigma if cfg.sigma is None else cfg.sigma
    # one normal per missing cell, drawn up front so gap layout does not shift the stream
    noise = rng.standard_normal(n_missing) * sigma if sigma > 0 else np.zeros(n_missing)

    out = x.copy()
    base = None
    age = 0
    k = 0
    n_clamped = 0
    for t in range(x.size):
        if not missing[t]:
            base = x[t]
            age = 0
            continue
        if base is None:
            if cfg.leading_fill == "zero":
                out[t] = 0.0
                k += 1
                continue
            raise DataError(f"series starts with missing values (index {t}) and no prior observation")
        age += 1
        v = base * math.exp(-cfg.rate * age) + noise[k]
        k += 1
        if v > 1.0 or v < -1.0:
            v = min(1.0, max(-1.0, v))
            n_clamped += 1
        out[t] = v
    return out, n_clamped


def impute_decay(series, cfg, rng=None):
    """Fill missing values of one series by exponential decay.

    Present values are returned untouched; imputed values are clamped to
    ``[-1, 1]``.  ``rng`` defaults to a generator seeded with ``cfg.seed``.
    With gaussian noise and no ``cfg.sigma`` the noise scale is the residual
    standard deviation of an AR(1) fitted to the consecutive present pairs.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    return _fill(series, cfg, rng)[0]


def impute_panel(panel, cfg, configs=None, threads=1, return_report=False):
    """Impute every column of ``panel``.

    Args:
        panel: a :class:`SentimentPanel`.
        cfg: default :class:`DecayConfig`; its ``seed`` is the master seed.
        configs: optional ``{ticker: DecayConfig}`` overrides.
        threads: worker threads; output does not depend on this.
        return_report: also return ``{ticker: ImputationReport}``.

    Column ``j`` draws its noise from a stream keyed by ``(seed, j)``, so
    results do not depend on the order columns are processed in.
    """
    configs = configs or {}

    def one(j):
        ticker = panel.tickers[j]
        c = configs.get(ticker, cfg)
        x = panel.values[:, j]
        try:
            if c.noise == "gaussian" and c.sigma is None and np.isnan(x).any():
                c = replace(c, sigma=fit_ar1(x).sigma)
            filled, n_clamped = _fill(x, c, _rng.stream(cfg.seed, _rng.IMPUTE, j))
        except SpillnetError as exc:
            raise type(exc)(f"{ticker}: {exc}") from exc
        return filled, ImputationReport(int(np.isnan(x).sum()), n_clamped, c.sigma or 0.0)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, range(panel.n_series)))
    else:
        results = [one(j) for j in range(panel.n_series)]

    values = np.column_stack([r[0] for r in results]) if results else panel.values
    out = SentimentPanel(panel.dates, panel.tickers, values.reshape(panel.values.shape))
    if return_report:
        return out, {t: r[1] for t, r in zip(panel.tickers, results)}
    return out
