"""Rolling-window and regime spillover analysis over a sentiment panel."""

import csv
import dataclasses
import datetime as dt
import json
import logging
import multiprocessing
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _rng
from .encoding import CollapsedStatesWarning, encode, quantile_thresholds
from .errors import DataError, DegenerateSeriesError, InsufficientDataError
from .graph import (
    SpilloverNetwork,
    arborescence_to_dot,
    build_network,
    density,
    jaccard,
    max_spanning_arborescence,
    network_to_dot,
    pagerank,
    top_influencers,
    weighted_degrees,
)
from .significance import pairwise_significance

log = logging.getLogger(__name__)

REGIME_MODES = ("span", "averaged")


@dataclass(frozen=True)
class PipelineConfig:
    """Estimation settings shared by rolling windows and regimes.

    ``filtered_measures`` selects the weights used for degree tables,
    PageRank and the arborescence in regime reports (densities are always
    reported both ways).
    """

    window_length: int = 200
    step: int = 10
    k: int = 1
    l: int = 1
    n_states: int = 3
    alpha: float = 0.10
    n_boot: int = 300
    master_seed: int = 0
    regime_breaks: tuple = ()
    global_thresholds: bool = False
    regime_mode: str = "span"
    unobserved: str = "uniform"
    markov_order: int | None = None
    min_regime_length: int = 50
    filtered_measures: bool = False
    top_k: int = 5

    def __post_init__(self):
        breaks = tuple(
            b if isinstance(b, dt.date) else dt.date.fromisoformat(str(b)) for b in self.regime_breaks
        )
        object.__setattr__(self, "regime_breaks", breaks)
        if self.window_length < 3:
            raise ValueError("window_length must be >= 3")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.k < 1 or self.l < 1:
            raise ValueError("k and l must be >= 1")
        if self.n_states < 2:
            raise ValueError("n_states must be >= 2")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.n_boot < 1:
            raise ValueError("n_boot must be >= 1")
        if self.regime_mode not in REGIME_MODES:
            raise ValueError(f"regime_mode must be one of {REGIME_MODES}")
        if list(breaks) != sorted(set(breaks)):
            raise ValueError("regime breaks must be strictly increasing")

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["regime_breaks"] = [b.isoformat() for b in self.regime_breaks]
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        if "regime_breaks" in d:
            d["regime_breaks"] = tuple(d["regime_breaks"] or ())
        return cls(**d)


@dataclass(frozen=True)
class Window:
    index: int
    start: int
    end: int
    start_date: dt.date
    end_date: dt.date

    @property
    def length(self):
        return self.end - self.start + 1


def n_windows(n_obs, window_length, step):
    if n_obs < window_length:
        return 0
    return (n_obs - window_length) // step + 1


def enumerate_windows(panel, cfg):
    """Windows ``[0, L-1], [step, step+L-1], ...``; a trailing partial window is dropped."""
    L = cfg.window_length
    if panel.n_obs < L:
        raise InsufficientDataError(f"panel has {panel.n_obs} rows, shorter than one window of {L}")
    return [
        Window(w, s, s + L - 1, panel.dates[s], panel.dates[s + L - 1])
        for w, s in enumerate(range(0, panel.n_obs - L + 1, cfg.step))
    ]


def _encode_block(values, cfg, thresholds=None):
    """Symbols ``(n, L)`` plus the inclusion mask and warning records."""
    L, n = values.shape
    symbols = np.ones((n, L), dtype=np.int64)
    included = np.ones(n, bool)
    notes = []
    for j in range(n):
        x = values[:, j]
        if x.min() == x.max():
            included[j] = False
            notes.append((j, "constant"))
            continue
        thr = thresholds[j] if thresholds is not None else None
        if thr is None:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", CollapsedStatesWarning)
                try:
                    thr = quantile_thresholds(x, cfg.n_states)
                except DegenerateSeriesError:
                    included[j] = False
                    notes.append((j, "constant"))
                    continue
            if caught:
                notes.append((j, "collapsed"))
        symbols[j] = encode(x, thr, cfg.n_states).symbols
    return symbols, included, notes


def panel_thresholds(panel, cfg):
    """Per-column thresholds over the whole panel (``global_thresholds`` mode)."""
    out = []
    for j in range(panel.n_series):
        x = panel.values[:, j]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", CollapsedStatesWarning)
                out.append(quantile_thresholds(x, cfg.n_states))
        except DegenerateSeriesError:
            out.append(None)
    return out


def estimate_network(values, labels, cfg, key, window=None, thresholds=None):
    """Encode a complete block of rows and estimate the full network.

    ``key`` namespaces the random streams, e.g. ``(WINDOW, w)``.
    """
    values = np.asarray(values, dtype=float)
    if np.isnan(values).any():
        raise DataError("panel has missing values; impute first")
    symbols, included, notes = _encode_block(values, cfg, thresholds)
    for j, what in notes:
        log.warning("%s: column %s is %s%s", key, labels[j], what,
                    ", excluded" if what == "constant" else "")
    res = pairwise_significance(
        symbols, cfg.n_states, cfg.k, cfg.l, cfg.n_boot, cfg.master_seed, key,
        included, cfg.markov_order, cfg.unobserved,
    )
    excluded = tuple(labels[j] for j in np.flatnonzero(~included))
    return build_network(res.te_norm, res.p_value, cfg.alpha, labels, res.te, window, excluded, res.boot_mean)


def window_network(panel, window, cfg, thresholds=None):
    """Spillover network for one rolling window of a complete panel."""
    block = panel.values[window.start : window.end + 1]
    return estimate_network(
        block, panel.tickers, cfg, (_rng.WINDOW, window.index),
        (window.start_date, window.end_date), thresholds,
    )


def _window_task(args):
    block, labels, cfg, index, dates, thresholds = args
    return estimate_network(block, labels, cfg, (_rng.WINDOW, index), dates, thresholds)


def _pool(threads):
    ctx = multiprocessing.get_context("fork") if "fork" in multiprocessing.get_all_start_methods() else None
    return ProcessPoolExecutor(max_workers=threads, mp_context=ctx)


def run_rolling(panel, cfg, threads=1, progress=None):
    """Networks for every rolling window, in window order.

    Output is identical for any ``threads``: each window and pair draws from
    its own keyed stream, and results are collected in window order.
    """
    if not panel.is_complete():
        raise DataError("panel has missing values; impute first")
    windows = enumerate_windows(panel, cfg)
    thresholds = panel_thresholds(panel, cfg) if cfg.global_thresholds else None
    tasks = [
        (panel.values[w.start : w.end + 1], panel.tickers, cfg, w.index, (w.start_date, w.end_date), thresholds)
        for w in windows
    ]
    nets = []
    if threads > 1 and len(tasks) > 1:
        with _pool(threads) as pool:
            for net in pool.map(_window_task, tasks):
                nets.append(net)
                if progress:
                    progress(len(nets), len(tasks))
    else:
        for t in tasks:
            nets.append(_window_task(t))
            if progress:
                progress(len(nets), len(tasks))
    return nets


@dataclass
class MetricSeries:
    """Per-window summaries; every field has one entry per window.

    ``jaccard_consecutive[0]`` is NaN (no previous window).  ``jaccard_cross``
    is filled when a second run's networks are supplied.
    """

    window_end_dates: list
    density_unfiltered: np.ndarray
    density_filtered: np.ndarray
    edge_counts: np.ndarray
    in_degree: np.ndarray
    out_degree: np.ndarray
    jaccard_consecutive: np.ndarray
    jaccard_cross: np.ndarray | None = None
    labels: tuple = ()


def metric_series(networks, other=None, filtered_degrees=False):
    """Densities, significant edge counts, degree matrices and Jaccard series."""
    if not networks:
        raise ValueError("need at least one network")
    labels = networks[0].labels
    dens_u = np.array([density(n, filtered=False) for n in networks])
    dens_f = np.array([density(n, filtered=True) for n in networks])
    edges = np.array([n.n_edges(filtered=True) for n in networks])
    degs = [weighted_degrees(n, filtered_degrees) for n in networks]
    jc = np.full(len(networks), np.nan)
    for w in range(1, len(networks)):
        jc[w] = jaccard(networks[w - 1], networks[w])
    cross = None
    if other is not None:
        if len(other) != len(networks):
            raise DataError(f"window counts differ: {len(networks)} vs {len(other)}")
        cross = np.array([jaccard(a, b) for a, b in zip(networks, other)])
    ends = [n.window[1] if n.window else None for n in networks]
    return MetricSeries(
        ends, dens_u, dens_f, edges,
        np.array([d[0] for d in degs]), np.array([d[1] for d in degs]),
        jc, cross, labels,
    )


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_rolling(out_dir, networks, metrics=None):
    """Write ``networks/window_<idx>.json`` and the ``metrics/*.csv`` tables."""
    out = Path(out_dir)
    metrics = metrics or metric_series(networks)
    width = max(3, len(str(len(networks) - 1)))
    for w, net in enumerate(networks):
        _write_text(out / "networks" / f"window_{w:0{width}d}.json", net.to_json())
    ends = [str(d) for d in metrics.window_end_dates]
    _write_csv(
        out / "metrics" / "density.csv",
        ["window", "end_date", "density_unfiltered", "density_filtered", "edge_count"],
        zip(range(len(ends)), ends, metrics.density_unfiltered, metrics.density_filtered, metrics.edge_counts),
    )
    for name, mat in (("degrees_in.csv", metrics.in_degree), ("degrees_out.csv", metrics.out_degree)):
        _write_csv(
            out / "metrics" / name,
            ["window", "end_date", *metrics.labels],
            ([w, e, *row] for w, (e, row) in enumerate(zip(ends, mat))),
        )
    # consecutive-window similarity is a stability diagnostic beyond the two-source comparison
    _write_csv(
        out / "metrics" / "jaccard.csv",
        ["window", "end_date", "jaccard_consecutive"],
        zip(range(len(ends)), ends, metrics.jaccard_consecutive),
    )


def load_networks(run_dir):
    """Networks written by :func:`write_rolling`, in window order."""
    files = sorted((Path(run_dir) / "networks").glob("window_*.json"), key=lambda p: int(p.stem[7:]))
    if not files:
        raise DataError(f"no window networks under {run_dir}")
    return [SpilloverNetwork.from_json(p.read_text(encoding="utf-8")) for p in files]


def compare_runs(dir_a, dir_b, out_path):
    """Per-window Jaccard similarity between two runs (e.g. news vs social media)."""
    a, b = load_networks(dir_a), load_networks(dir_b)
    if len(a) != len(b):
        raise DataError(f"window counts differ: {len(a)} vs {len(b)}")
    rows = []
    for w, (na, nb) in enumerate(zip(a, b)):
        rows.append((
            w,
            na.window[1] if na.window else "",
            nb.window[1] if nb.window else "",
            jaccard(na, nb, filtered=True),
            jaccard(na, nb, filtered=False),
        ))
    _write_csv(Path(out_path), ["window", "end_date_a", "end_date_b", "jaccard_filtered", "jaccard_unfiltered"], rows)
    return np.array([r[3] for r in rows])


def regime_slices(panel, breaks):
    """``[(name, start, stop)]`` row ranges; regime ``r`` spans ``[b_{r-1}, b_r)``."""
    for b in breaks:
        if not panel.dates[0] < b <= panel.dates[-1]:
            raise DataError(f"regime break {b} outside panel range {panel.dates[0]}..{panel.dates[-1]}")
    cuts = [0] + [int(np.searchsorted(np.array(panel.dates, dtype="datetime64[D]"),
                                      np.datetime64(b, "D"))) for b in breaks] + [panel.n_obs]
    return [(f"regime_{r + 1}", cuts[r], cuts[r + 1]) for r in range(len(cuts) - 1)]


def _averaged_network(panel, start, stop, networks, cfg):
    dates = panel.dates
    pick = [n for n in networks if n.window and dates[start] <= _as_date(n.window[1]) <= dates[stop - 1]]
    if not pick:
        raise DataError(f"no rolling windows end inside {dates[start]}..{dates[stop - 1]}")
    w = np.mean([n.weights for n in pick], axis=0)
    te = np.mean([n.te for n in pick], axis=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        p = np.nanmean([n.pvalues for n in pick], axis=0)
    return build_network(w, p, cfg.alpha, panel.tickers, te, (dates[start], dates[stop - 1]))


def _as_date(d):
    return d if isinstance(d, dt.date) else dt.date.fromisoformat(str(d))


def _histogram(values, bins=10):
    counts, edges = np.histogram(values, bins=bins)
    return {"counts": counts.tolist(), "edges": [float(e) for e in edges]}


def regime_report(panel, cfg, networks=None):
    """One estimated network and its analytics per regime.

    Each report holds the network, top influencers, a full centrality table,
    the maximum spanning arborescence with per-path step counts and weights,
    and weighted degree distributions.  In ``averaged`` mode the regime
    network is the mean of the rolling ``networks`` ending in the regime.
    """
    if not cfg.regime_breaks:
        raise ValueError("config has no regime breaks")
    if not panel.is_complete():
        raise DataError("panel has missing values; impute first")
    if cfg.regime_mode == "averaged" and networks is None:
        raise ValueError("averaged regime mode needs the rolling networks")
    filt = cfg.filtered_measures
    reports = []
    for r, (name, start, stop) in enumerate(regime_slices(panel, cfg.regime_breaks)):
        if stop - start < cfg.min_regime_length:
            raise InsufficientDataError(
                f"{name} has {stop - start} observations, fewer than {cfg.min_regime_length}"
            )
        span = (panel.dates[start], panel.dates[stop - 1])
        if cfg.regime_mode == "span":
            net = estimate_network(panel.values[start:stop], panel.tickers, cfg, (_rng.REGIME, r), span)
        else:
            net = _averaged_network(panel, start, stop, networks, cfg)
        ind, outd = weighted_degrees(net, filt)
        pr_out = pagerank(net, filtered=filt, direction="out")
        pr_in = pagerank(net, filtered=filt, direction="in")
        arb = max_spanning_arborescence(net, filtered=filt)
        steps = np.array(arb.path_steps, dtype=float)
        pw = np.array(arb.path_weights, dtype=float)
        reports.append({
            "name": name,
            "start": span[0].isoformat(),
            "end": span[1].isoformat(),
            "n_obs": stop - start,
            "mode": cfg.regime_mode,
            "filtered_measures": filt,
            "density_unfiltered": density(net, filtered=False),
            "density_filtered": density(net, filtered=True),
            "edge_count": net.n_edges(filtered=True),
            "top_influencers": {
                key: [{"label": lab, "score": s} for lab, s in rank]
                for key, rank in top_influencers(net, min(cfg.top_k, net.n), filt).items()
            },
            "centrality": [
                {"label": lab, "pagerank": float(a), "pagerank_receiver": float(b),
                 "in_degree": float(c), "out_degree": float(d)}
                for lab, a, b, c, d in zip(net.labels, pr_out, pr_in, ind, outd)
            ],
            "msa": arb.to_dict(),
            "path_stats": {
                "n_paths": len(arb.paths),
                "mean_steps": float(steps.mean()) if steps.size else 0.0,
                "mean_weight": float(pw.mean()) if pw.size else 0.0,
                "max_path": list(arb.max_path()),
                "min_path": list(arb.min_path()),
                "steps_histogram": _histogram(steps) if steps.size else None,
                "weight_histogram": _histogram(pw) if pw.size else None,
            },
            "degree_distribution": {
                "in_degree": [float(v) for v in ind],
                "out_degree": [float(v) for v in outd],
                "in_histogram": _histogram(ind),
                "out_histogram": _histogram(outd),
            },
            "_network": net,
            "_arborescence": arb,
        })
    return reports


def write_regimes(out_dir, reports):
    """``regimes/<r>/report.json``, ``msa.dot``, ``network.json`` and CSV tables."""
    out = Path(out_dir) / "regimes"
    for rep in reports:
        d = out / rep["name"]
        body = {k: v for k, v in rep.items() if not k.startswith("_")}
        _write_text(d / "report.json", json.dumps(body, indent=1))
        _write_text(d / "msa.dot", arborescence_to_dot(rep["_arborescence"], rep["name"]))
        _write_text(d / "network.json", rep["_network"].to_json())
        _write_text(d / "network.dot", network_to_dot(rep["_network"], rep["filtered_measures"], rep["name"]))
        _write_csv(
            d / "centrality.csv",
            ["label", "pagerank", "pagerank_receiver", "in_degree", "out_degree"],
            ([c["label"], c["pagerank"], c["pagerank_receiver"], c["in_degree"], c["out_degree"]]
             for c in rep["centrality"]),
        )
        _write_csv(
            d / "paths.csv",
            ["path", "steps", "total_weight"],
            ((">".join(p["vertices"]), p["steps"], p["total_weight"]) for p in rep["msa"]["paths"]),
        )


def default_threads():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1
