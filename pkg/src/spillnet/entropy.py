"""Plug-in Shannon, conditional and transfer entropy in bits.

All estimators work on symbol sequences (``SymbolSeries`` or integer arrays
with symbols ``1..S``).  Probabilities are relative frequencies and
``0 log 0 = 0``.  Every term of a transfer entropy is computed over one
shared set of time indices: the future value ``z[t]`` for
``t = max(k, l), ..., L - 1`` together with the ``k`` preceding target
values and the ``l`` preceding source values.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .encoding import SymbolSeries, symbolize
from .errors import InsufficientDataError
from .panel import simulate_ar1


def _symbols(x):
    """0-based int64 codes and the declared alphabet size."""
    if isinstance(x, SymbolSeries):
        return x.symbols - 1, x.alphabet_size
    s = np.asarray(x)
    if s.size == 0:
        raise InsufficientDataError("empty symbol series")
    if not np.issubdtype(s.dtype, np.integer):
        if not np.all(s == np.round(s)):
            raise ValueError("symbols must be integers")
    s = s.astype(np.int64)
    if s.min() < 1:
        raise ValueError("symbols must be >= 1")
    return s - 1, max(int(s.max()), 2)


def _pair(source, target):
    y, sy = _symbols(source)
    z, sz = _symbols(target)
    if y.shape[-1] != z.shape[-1]:
        raise ValueError(f"length mismatch: source {y.shape[-1]}, target {z.shape[-1]}")
    if isinstance(source, SymbolSeries) and isinstance(target, SymbolSeries) and sy != sz:
        raise ValueError(f"alphabet mismatch: source {sy}, target {sz}")
    return y, z, max(sy, sz)


def _xlog2x(n):
    c = np.arange(n + 1, dtype=float)
    out = np.zeros(n + 1)
    out[1:] = c[1:] * np.log2(c[1:])
    return out


def _entropy_counts(counts, n, table=None):
    """Entropy in bits of count vectors along the last axis (all summing to n)."""
    if table is None:
        table = _xlog2x(n)
    return math.log2(n) - table[counts].sum(axis=-1) / n


def _history(s, depth, start, base):
    """Integer code of ``s[..., t-depth:t]`` for ``t = start..L-1``."""
    L = s.shape[-1]
    code = np.zeros(s.shape[:-1] + (L - start,), dtype=np.int64)
    for m in range(1, depth + 1):
        code = code * base + s[..., start - m : L - m]
    return code


def shannon_entropy(symbols):
    """``-sum p log2 p`` over the empirical symbol frequencies."""
    s, S = _symbols(symbols)
    counts = np.bincount(s, minlength=S)
    return float(max(_entropy_counts(counts, s.size), 0.0))


def conditional_entropy(symbols, k=1, start=None):
    """``H(z_{t+1} | z_t, ..., z_{t-k+1})`` in bits.

    ``start`` is the index of the first predicted value (default ``k``); pass
    a larger value to align estimates for different ``k`` on the same
    indices.
    """
    s, S = _symbols(symbols)
    if k < 1:
        raise ValueError("k must be >= 1")
    start = k if start is None else start
    if start < k:
        raise ValueError("start must be >= k")
    if start >= s.size:
        raise InsufficientDataError(f"series length {s.size} too short for start {start}")
    n = s.size - start
    hist = _history(s, k, start, S)
    joint = s[start:] * S**k + hist
    table = _xlog2x(n)
    h_joint = _entropy_counts(np.bincount(joint, minlength=S ** (k + 1)), n, table)
    h_hist = _entropy_counts(np.bincount(hist, minlength=S**k), n, table)
    return float(max(h_joint - h_hist, 0.0))


def _te_core(targets, sources, k, l, S):
    """Transfer entropy from each source row to its target.

    Args:
        targets: ``(J, L)`` 0-based target symbols.
        sources: ``(J, B, L)`` 0-based source symbols; row ``j`` of
            ``sources`` is paired with ``targets[j]``.

    Returns:
        ``(te, ce)`` where ``te`` is ``(J, B)`` and ``ce`` is the ``(J,)``
        target-history conditional entropy on the same indices.
    """
    J, B, L = sources.shape
    start = max(k, l)
    n = L - start
    if n < 2:
        raise InsufficientDataError(f"series length {L} too short for k={k}, l={l}")
    Sk, Sl = S**k, S**l
    table = _xlog2x(n)

    zh = _history(targets, k, start, S)
    a = targets[:, start:] * Sk + zh
    off = np.arange(J)[:, None]
    c_fut = np.bincount((a + off * (S * Sk)).ravel(), minlength=J * S * Sk).reshape(J, S * Sk)
    c_zh = np.bincount((zh + off * Sk).ravel(), minlength=J * Sk).reshape(J, Sk)
    ce = _entropy_counts(c_fut, n, table) - _entropy_counts(c_zh, n, table)

    yh = _history(sources, l, start, S)
    cells = S * Sk * Sl
    code = a[:, None, :] * Sl + yh
    code += (np.arange(J * B).reshape(J, B) * cells)[:, :, None]
    c3 = np.bincount(code.ravel(), minlength=J * B * cells).reshape(J, B, S, Sk * Sl)
    c_hy = c3.sum(axis=2)
    h_cond = _entropy_counts(c3.reshape(J, B, cells), n, table) - _entropy_counts(c_hy, n, table)
    te = np.maximum(ce[:, None] - h_cond, 0.0)
    return te, np.maximum(ce, 0.0)


def transfer_entropy(source, target, k=1, l=1):
    """Transfer entropy from ``source`` to ``target`` in bits.

    ``k`` is the target history length and ``l`` the source history length.
    Floored at 0.
    """
    y, z, S = _pair(source, target)
    if y.ndim != 1:
        raise ValueError("source must be one-dimensional")
    te, _ = _te_core(z[None, :], y[None, None, :], k, l, S)
    return float(te[0, 0])


def normalized_te(te, ce):
    """``te / ce`` clamped to ``[0, 1]``; 0 when ``ce`` is 0."""
    if ce <= 0:
        return 0.0
    return float(min(max(te / ce, 0.0), 1.0))


@dataclass(frozen=True)
class TeEstimate:
    te_bits: float
    te_normalized: float
    k: int
    l: int
    n_effective: int
    ce_bits: float
    degenerate: bool = False


def te_estimate(source, target, k=1, l=1):
    """Raw and normalised transfer entropy for one ordered pair.

    The normaliser is the one-step conditional entropy ``H(z_{t+1} | z_t)``
    of the target on the same indices as the transfer entropy.
    """
    y, z, S = _pair(source, target)
    te = transfer_entropy(y + 1, z + 1, k, l)
    start = max(k, l)
    ce1 = conditional_entropy(z + 1, 1, start=start)
    return TeEstimate(
        te_bits=te,
        te_normalized=normalized_te(te, ce1),
        k=k,
        l=l,
        n_effective=z.size - start,
        ce_bits=ce1,
        degenerate=ce1 <= 0,
    )


@dataclass(frozen=True)
class LagCalibration:
    """Conditional entropy of simulated AR(1) symbols by sample size and lag.

    ``ce_surface[r, c]`` is the entropy for ``sample_sizes[r]`` at
    ``lags[c]``; each row uses one set of indices for every lag, which makes
    rows non-increasing.
    """

    sample_sizes: tuple
    lags: tuple
    ce_surface: np.ndarray
    recommended_lag: int
    reference_size: int

    def rows(self):
        """Long-format ``(sample_size, lag, ce_bits)`` tuples."""
        return [
            (n, lag, float(self.ce_surface[r, c]))
            for r, n in enumerate(self.sample_sizes)
            for c, lag in enumerate(self.lags)
        ]


DEFAULT_SAMPLE_SIZES = (100, 150, 200, 500, 1000, 10_000, 100_000)


def calibrate_lags(
    sample_sizes=DEFAULT_SAMPLE_SIZES,
    max_lag=6,
    psi1=0.5,
    sigma=0.1,
    intercept=0.0,
    seed=0,
    n_states=3,
    reference_size=200,
    drop_tol=0.01,
):
    """Conditional entropy against history length for simulated AR(1) data.

    Each sample size gets its own AR(1) draw, encoded on its own quantiles.
    The recommended lag is read off the row for ``reference_size`` (or the
    nearest simulated size): the largest lag reached before any one-lag drop
    in conditional entropy exceeds ``drop_tol`` bits.
    """
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if abs(psi1) >= 1:
        raise ValueError(f"|psi1| must be < 1, got {psi1}")
    sizes = tuple(int(n) for n in sample_sizes)
    lags = tuple(range(1, max_lag + 1))
    surface = np.empty((len(sizes), max_lag))
    for r, n in enumerate(sizes):
        if n <= max_lag + 1:
            raise InsufficientDataError(f"sample size {n} too small for max_lag {max_lag}")
        x = simulate_ar1(n, psi1, sigma, _rng.stream(seed, _rng.CALIBRATE, n), intercept)
        sym = symbolize(x, n_states)
        for c, lag in enumerate(lags):
            surface[r, c] = conditional_entropy(sym, lag, start=max_lag)
    ref_row = int(np.argmin([abs(n - reference_size) for n in sizes]))
    drops = -np.diff(surface[ref_row])
    rec = 1
    for d in drops:
        if d > drop_tol:
            break
        rec += 1
    surface.setflags(write=False)
    return LagCalibration(sizes, lags, surface, rec, sizes[ref_row])
