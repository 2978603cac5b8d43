"""Quantile discretisation of continuous series into ordered states."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError


class CollapsedStatesWarning(UserWarning):
    """Tied values made two or more quantile thresholds coincide."""


@dataclass(frozen=True)
class SymbolSeries:
    """Symbols in ``1..alphabet_size`` plus the thresholds that produced them.

    After tie collapse ``thresholds`` may hold fewer than
    ``alphabet_size - 1`` entries; ``n_effective`` is the number of states
    that can actually occur.
    """

    symbols: np.ndarray
    alphabet_size: int
    thresholds: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "symbols", s)
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        if s.size and (s.min() < 1 or s.max() > self.alphabet_size):
            raise ValueError(f"symbols must lie in 1..{self.alphabet_size}")

    def __len__(self):
        return self.symbols.size

    @property
    def n_effective(self):
        return len(self.thresholds) + 1

    def counts(self):
        return np.bincount(self.symbols - 1, minlength=self.alphabet_size)


def quantile_thresholds(series, n_states=3):
    """Thresholds at cumulative probabilities ``i / n_states``.

    Quantiles use linear interpolation between order statistics.  Coinciding
    thresholds (heavy ties) are merged with a :class:`CollapsedStatesWarning`.

    Raises:
        DegenerateSeriesError: the series is constant.
    """
    x = np.asarray(series, dtype=float)
    if n_states < 2:
        raise ValueError("n_states must be >= 2")
    if x.size < n_states:
        raise InsufficientDataError(f"need at least {n_states} values, got {x.size}")
    if np.isnan(x).any():
        raise ValueError("series contains missing values")
    if x.min() == x.max():
        raise DegenerateSeriesError("constant series cannot be discretised")
    q = np.quantile(x, np.arange(1, n_states) / n_states)
    uq = np.unique(q)
    if uq.size < q.size:
        warnings.warn(
            f"tied values collapse {q.size + 1} states to {uq.size + 1}",
            CollapsedStatesWarning,
            stacklevel=2,
        )
    return uq


def encode(series, thresholds, n_states=None):
    """Map values to states using ascending ``thresholds``.

    The lowest bin is closed (``x <= q_1`` is state 1) and, when there are at
    least two thresholds, so is the highest (``x >= q_last`` is the top
    state).  Interior bins are ``q_{s-1} < x <= q_s``.  With three states
    this is ``x <= q1 -> 1``, ``q1 < x < q2 -> 2``, ``x >= q2 -> 3``.
    """
    x = np.asarray(series, dtype=float)
    thr = np.asarray(thresholds, dtype=float)
    if thr.ndim != 1 or thr.size == 0:
        raise ValueError("need at least one threshold")
    if np.any(np.diff(thr) <= 0):
        raise ValueError("thresholds must be strictly ascending")
    if n_states is None:
        n_states = thr.size + 1
    if n_states < thr.size + 1:
        raise ValueError("more thresholds than states allow")
    if thr.size == 1:
        sym = 1 + (x > thr[0])
    else:
        sym = 1 + np.searchsorted(thr[:-1], x, side="left")
        sym = np.where(x >= thr[-1], thr.size + 1, sym)
    return SymbolSeries(sym.astype(np.int64), int(n_states), thr)


def symbolize(series, n_states=3):
    """Encode ``series`` on its own quantile thresholds."""
    return encode(series, quantile_thresholds(series, n_states), n_states)
