"""Markov-bootstrap significance for transfer entropy.

The null distribution for ``TE(source -> target)`` is built by simulating
the source from a Markov chain fitted to the source itself, which keeps the
source's own serial dependence and destroys any link to the target.  The
target is left untouched.
"""

from dataclasses import dataclass

import numpy as np

from . import _rng
from .entropy import _history, _pair, _symbols, _te_core, conditional_entropy
from .encoding import SymbolSeries
from .errors import InsufficientDataError

UNOBSERVED_ROWS = ("uniform", "marginal")

# bootstrap values within this distance of the observed one count as ties
TIE_EPS = 1e-12

# bootstrap chains simulated per vectorised batch
CHUNK = 40_000


@dataclass(frozen=True)
class MarkovModel:
    """Order-``order`` chain over ``n_states`` symbols.

    Histories are coded in base ``n_states`` with the most recent symbol as
    the most significant digit.  ``initial`` is a distribution over
    histories (for order 1, over symbols); ``transition[h]`` is the
    next-symbol distribution after history ``h``.  ``unobserved[h]`` marks
    rows that were filled in because ``h`` never occurred.
    """

    order: int
    n_states: int
    initial: np.ndarray
    transition: np.ndarray
    unobserved: np.ndarray


def fit_markov(symbols, order=1, n_states=None, unobserved="uniform"):
    """Relative-frequency estimate of initial and transition probabilities.

    Rows for histories that never occur are uniform, or the marginal symbol
    frequencies when ``unobserved="marginal"``.
    """
    s, S = _symbols(symbols)
    S = n_states or S
    if order < 1:
        raise ValueError("order must be >= 1")
    if s.size <= order:
        raise InsufficientDataError(f"series length {s.size} must exceed order {order}")
    if unobserved not in UNOBSERVED_ROWS:
        raise ValueError(f"unobserved must be one of {UNOBSERVED_ROWS}")
    H = S**order
    windows = _history(np.append(s, 0), order, order, S)
    initial = np.bincount(windows, minlength=H) / windows.size

    hist = windows[:-1]
    counts = np.bincount(hist * S + s[order:], minlength=H * S).reshape(H, S).astype(float)
    totals = counts.sum(axis=1)
    empty = totals == 0
    trans = np.empty_like(counts)
    trans[~empty] = counts[~empty] / totals[~empty, None]
    if unobserved == "uniform":
        trans[empty] = 1.0 / S
    else:
        trans[empty] = np.bincount(s, minlength=S) / s.size
    for a in (initial, trans, empty):
        a.setflags(write=False)
    return MarkovModel(order, S, initial, trans, empty)


def _cdf(prob):
    """First ``S - 1`` cumulative probabilities of each row, exactly 1 past the last positive entry."""
    prob = np.atleast_2d(prob)
    cdf = np.cumsum(prob, axis=1)[:, :-1]
    tail = np.cumsum(prob[:, ::-1], axis=1)[:, ::-1][:, 1:]
    cdf[tail == 0] = 1.0
    return cdf


def simulate_codes(model, uniforms, which=None):
    """Simulate one chain per row of ``uniforms`` (shape ``(B, L)``).

    ``model`` may be a sequence of models sharing order and alphabet, in
    which case row ``b`` follows ``model[which[b]]``.  Returns 0-based
    symbols of shape ``(B, L)``.  The first ``order`` symbols come from the
    initial distribution using column 0; symbol ``t >= order`` uses column
    ``t``.  The output is a pure function of the uniforms.
    """
    models = [model] if isinstance(model, MarkovModel) else list(model)
    u = np.asarray(uniforms, dtype=float)
    B, L = u.shape
    S, k = models[0].n_states, models[0].order
    if any(m.n_states != S or m.order != k for m in models):
        raise ValueError("models must share order and alphabet")
    if L < k:
        raise ValueError(f"length {L} shorter than order {k}")
    which = np.zeros(B, dtype=np.int64) if which is None else np.asarray(which, dtype=np.int64)
    H = S**k
    init_cdf = np.concatenate([_cdf(m.initial) for m in models])
    trans_cdf = np.concatenate([_cdf(m.transition) for m in models])

    h = np.zeros(B, dtype=np.int64)
    for c in range(H - 1):
        h += u[:, 0] >= init_cdf[which, c]
    out = np.empty((L, B), dtype=np.int64)
    for j in range(k):
        out[j] = (h // S**j) % S
    if L == k:
        return np.ascontiguousarray(out.T)

    # nxt[t, g, b]: symbol chain b emits at time t if its history is g
    ut = np.ascontiguousarray(u[:, k:].T)
    nxt = np.empty((L - k, H, B), dtype=np.int8)
    base = which * H
    for g in range(H):
        thr = trans_cdf[base + g]
        acc = nxt[:, g, :]
        np.greater_equal(ut, thr[:, 0], out=acc.view(bool))
        for c in range(1, S - 1):
            acc += ut >= thr[:, c]
    flat = nxt.reshape(L - k, H * B)
    pos = np.arange(B, dtype=np.int64)
    top = S ** (k - 1)
    if k == 1:
        x = h
        for t in range(L - 1):
            x = flat[t][x * B + pos].astype(np.int64)
            out[t + 1] = x
    else:
        for t in range(L - k):
            x = flat[t][h * B + pos].astype(np.int64)
            out[t + k] = x
            h = x * top + h // S
    return np.ascontiguousarray(out.T)


def simulate(model, length, rng):
    """One simulated :class:`SymbolSeries` of ``length`` symbols."""
    if length < 1:
        raise ValueError("length must be >= 1")
    codes = simulate_codes(model, rng.random((1, length)))[0]
    return SymbolSeries(codes + 1, model.n_states, np.array([]))


@dataclass(frozen=True)
class SignificanceResult:
    te_observed: float
    p_value: float
    n_boot: int
    exceed_count: int
    boot_mean: float


def te_pvalue(source, target, k=1, l=1, n_boot=300, rng=None, order=None, unobserved="uniform"):
    """Bootstrap p-value ``M / n_boot`` for ``TE(source -> target)``.

    ``M`` counts bootstrap values at least as large as the observed one.
    The bootstrap chain order defaults to ``k``.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    y, z, S = _pair(source, target)
    if rng is None:
        rng = np.random.default_rng()
    model = fit_markov(y + 1, order or k, S, unobserved)
    boots = simulate_codes(model, rng.random((n_boot, y.size)))
    obs, _ = _te_core(z[None, :], y[None, None, :], k, l, S)
    te_b, _ = _te_core(z[None, :], boots[None], k, l, S)
    m = int(np.sum(te_b[0] >= obs[0, 0] - TIE_EPS))
    return SignificanceResult(float(obs[0, 0]), m / n_boot, n_boot, m, float(te_b[0].mean()))


@dataclass
class PairwiseResult:
    """Ordered-pair estimates; entry ``[i, j]`` is for ``i -> j``.

    Rows and columns of vertices not in ``included`` hold 0 for the
    entropies and NaN for the p-values.
    """

    te: np.ndarray
    te_norm: np.ndarray
    p_value: np.ndarray
    boot_mean: np.ndarray
    exceed: np.ndarray
    included: np.ndarray
    n_boot: int


def pairwise_significance(
    symbols, n_states, k=1, l=1, n_boot=300, seed=0, key=(), included=None,
    order=None, unobserved="uniform",
):
    """Transfer entropy and bootstrap p-values for all ordered pairs.

    Args:
        symbols: ``(n, L)`` array of 1-based symbols, one row per series.
        n_states: alphabet size.
        seed, key: pair ``(i, j)`` draws its uniforms from the stream
            ``(seed, *key, i, j)``, so each entry depends only on its own
            pair and never on evaluation order.
        included: boolean mask of series that take part.
    """
    s = np.asarray(symbols, dtype=np.int64) - 1
    n, L = s.shape
    S = n_states
    inc = np.ones(n, bool) if included is None else np.asarray(included, bool)
    te = np.zeros((n, n))
    te_norm = np.zeros((n, n))
    pv = np.full((n, n), np.nan)
    bmean = np.zeros((n, n))
    exceed = np.zeros((n, n), dtype=np.int64)
    idx = np.flatnonzero(inc)
    start = max(k, l)
    if k == 1:
        ce1 = None
    else:
        ce1 = {j: conditional_entropy(s[j] + 1, 1, start=start) for j in idx}

    # sources are simulated together in chunks of about CHUNK chains
    per_source = max(idx.size - 1, 1) * n_boot
    step = max(1, CHUNK // per_source)
    for c0 in range(0, idx.size, step):
        chunk = [i for i in idx[c0 : c0 + step] if idx.size > 1]
        if not chunk:
            continue
        models = [fit_markov(s[i] + 1, order or k, S, unobserved) for i in chunk]
        u = np.concatenate(
            [_rng.stream(seed, *key, i, j).random((n_boot, L)) for i in chunk for j in idx if j != i]
        )
        which = np.repeat(np.arange(len(chunk)), per_source)
        sims = simulate_codes(models, u, which).reshape(len(chunk), idx.size - 1, n_boot, L)
        for q, i in enumerate(chunk):
            js = idx[idx != i]
            targets = s[js]
            obs, ce = _te_core(targets, np.broadcast_to(s[i], (js.size, 1, L)), k, l, S)
            te_b, _ = _te_core(targets, sims[q], k, l, S)
            obs = obs[:, 0]
            m = np.sum(te_b >= obs[:, None] - TIE_EPS, axis=1)
            denom = ce if ce1 is None else np.array([ce1[j] for j in js])
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(denom > 0, obs / denom, 0.0)
            te[i, js] = obs
            te_norm[i, js] = np.clip(ratio, 0.0, 1.0)
            pv[i, js] = m / n_boot
            bmean[i, js] = te_b.mean(axis=1)
            exceed[i, js] = m
    return PairwiseResult(te, te_norm, pv, bmean, exceed, inc, n_boot)
