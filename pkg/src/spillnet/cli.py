"""Command-line interface.

Every subcommand resolves its parameters as built-in defaults, then the JSON
``--config`` file (a plain parameter object, or a run manifest whose
``config`` key is used), then explicit flags.  A run manifest is written
atomically when the command ends, whether it succeeds or not, so a rerun
with ``--config <manifest>`` reproduces the outputs.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical error.
"""

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__, _rng
from .encoding import symbolize
from .entropy import DEFAULT_SAMPLE_SIZES, calibrate_lags, te_estimate
from .errors import DataError, NumericalError, SpillnetError
from .imputation import DecayConfig, impute_panel
from .panel import load_panel, save_panel, write_stats
from .pipeline import (
    PipelineConfig,
    compare_runs,
    default_threads,
    load_networks,
    metric_series,
    regime_report,
    run_rolling,
    write_regimes,
    write_rolling,
)
from .significance import te_pvalue

log = logging.getLogger("spillnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

DEFAULT_BREAKS = ("2021-08-02", "2022-10-03")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _dates(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


# (flag, config key, type, default, help); flags parse to None so that only
# explicitly given values override the config file
_D = PipelineConfig()
PIPELINE_OPTS = [
    ("--window", "window_length", int, _D.window_length, "rolling window length in observations"),
    ("--step", "step", int, _D.step, "rolling window step in observations"),
    ("--k", "k", int, _D.k, "target history length"),
    ("--l", "l", int, _D.l, "source history length"),
    ("--n-states", "n_states", int, _D.n_states, "number of quantile states"),
    ("--alpha", "alpha", float, _D.alpha, "significance level for edge filtering"),
    ("--n-boot", "n_boot", int, _D.n_boot, "bootstrap replications per ordered pair"),
    ("--seed", "master_seed", int, _D.master_seed, "master seed"),
    ("--global-thresholds", "global_thresholds", bool, _D.global_thresholds,
     "quantile thresholds from the whole panel instead of each window"),
    ("--markov-order", "markov_order", int, _D.markov_order, "bootstrap chain order (default: k)"),
    ("--unobserved", "unobserved", ["uniform", "marginal"], _D.unobserved,
     "transition row used for source histories never observed"),
    ("--filtered-measures", "filtered_measures", bool, _D.filtered_measures,
     "regime degrees, PageRank and MSA on significant edges only"),
    ("--min-regime-length", "min_regime_length", int, _D.min_regime_length, "shortest estimable regime"),
    ("--top-k", "top_k", int, _D.top_k, "influencers listed per ranking"),
]
REGIME_OPTS = [
    ("--breaks", "regime_breaks", _dates, DEFAULT_BREAKS, "comma-separated regime break dates"),
    ("--regime-mode", "regime_mode", ["span", "averaged"], _D.regime_mode,
     "one span-wide estimate per regime, or the mean of rolling windows inside it"),
]
ROLLING_OPTS = PIPELINE_OPTS + [
    ("--breaks", "regime_breaks", _dates, (), "also write regime reports for these comma-separated break dates"),
]
IMPUTE_OPTS = [
    ("--lambda", "rate", float, 0.23, "decay rate"),
    ("--noise", "noise", ["none", "gaussian"], "gaussian", "noise added to imputed values"),
    ("--sigma", "sigma", float, None, "noise standard deviation (default: AR(1) residual sd per column)"),
    ("--seed", "seed", int, 0, "noise seed"),
    ("--leading-fill", "leading_fill", ["error", "zero"], "error", "handling of missing values before the first observation"),
]
ENCODE_OPTS = [
    ("--n-states", "n_states", int, 3, "number of quantile states"),
]
TEPAIR_OPTS = [
    ("--source", "source", str, None, "source ticker (required)"),
    ("--target", "target", str, None, "target ticker (required)"),
    ("--start-date", "start_date", str, None, "first date used (default: panel start)"),
    ("--end-date", "end_date", str, None, "last date used (default: panel end)"),
    ("--k", "k", int, 1, "target history length"),
    ("--l", "l", int, 1, "source history length"),
    ("--n-states", "n_states", int, 3, "number of quantile states"),
    ("--n-boot", "n_boot", int, 300, "bootstrap replications"),
    ("--seed", "seed", int, 0, "master seed"),
    ("--markov-order", "markov_order", int, None, "bootstrap chain order (default: k)"),
    ("--unobserved", "unobserved", ["uniform", "marginal"], "uniform",
     "transition row used for source histories never observed"),
]
CALIBRATE_OPTS = [
    ("--sample-sizes", "sample_sizes", _ints, DEFAULT_SAMPLE_SIZES, "comma-separated simulated sample sizes"),
    ("--max-lag", "max_lag", int, 6, "largest history length"),
    ("--psi1", "psi1", float, 0.5, "AR(1) coefficient"),
    ("--sigma", "sigma", float, 0.1, "AR(1) noise standard deviation"),
    ("--intercept", "intercept", float, 0.0, "AR(1) intercept"),
    ("--seed", "seed", int, 0, "master seed"),
    ("--n-states", "n_states", int, 3, "number of quantile states"),
    ("--reference-size", "reference_size", int, 200, "sample size the lag recommendation is read from"),
    ("--drop-tol", "drop_tol", float, 0.01, "entropy drop in bits that still justifies one more lag"),
]


def _fmt_default(v):
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v) or "none"
    return v


def _add_opts(p, opts):
    for flag, key, typ, default, text in opts:
        shown = f"{text} (default: {_fmt_default(default)})" if "default:" not in text else text
        if typ is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None, help=shown)
        elif isinstance(typ, list):
            p.add_argument(flag, dest=key, choices=typ, default=None, help=shown)
        else:
            p.add_argument(flag, dest=key, type=typ, default=None, help=shown,
                           metavar=flag.lstrip("-").upper().replace("-", "_"))


def _add_common(p, threads=False):
    p.add_argument("--config", help="JSON parameter file or run manifest; flags override it (default: none)")
    p.add_argument("--manifest", help="manifest path (default: next to the output)")
    if threads:
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes; results do not depend on it (default: available cores)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging (default: off)")


def build_parser():
    parser = _Parser(prog="spillnet", description="Transfer-entropy spillover networks for sentiment panels.")
    parser.add_argument("--version", action="version", version=f"spillnet {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("stats", help="per-column descriptive statistics")
    p.add_argument("--input", required=True, help="panel CSV")
    p.add_argument("--out", required=True, help="statistics CSV")
    _add_common(p)
    p.set_defaults(opts=[], handler=cmd_stats)

    p = sub.add_parser("impute", help="fill missing values by exponential decay")
    p.add_argument("input", help="panel CSV with missing cells")
    p.add_argument("out", help="imputed panel CSV")
    _add_opts(p, IMPUTE_OPTS)
    _add_common(p, threads=True)
    p.set_defaults(opts=IMPUTE_OPTS, handler=cmd_impute)

    p = sub.add_parser("encode", help="quantile symbols for every column")
    p.add_argument("--input", required=True, help="complete panel CSV")
    p.add_argument("--out", required=True, help="symbol CSV")
    _add_opts(p, ENCODE_OPTS)
    _add_common(p)
    p.set_defaults(opts=ENCODE_OPTS, handler=cmd_encode)

    p = sub.add_parser("tepair", help="transfer entropy and bootstrap p-value for one ordered pair")
    p.add_argument("--input", required=True, help="complete panel CSV")
    p.add_argument("--out", help="JSON result file (default: standard output)")
    _add_opts(p, TEPAIR_OPTS)
    _add_common(p)
    p.set_defaults(opts=TEPAIR_OPTS, handler=cmd_tepair)

    p = sub.add_parser("calibrate", help="conditional entropy against lag for simulated AR(1) data")
    p.add_argument("--out", required=True, help="long-format CSV (sample_size, lag, ce_bits)")
    _add_opts(p, CALIBRATE_OPTS)
    _add_common(p)
    p.set_defaults(opts=CALIBRATE_OPTS, handler=cmd_calibrate)

    p = sub.add_parser("rolling", help="rolling-window spillover networks and metrics")
    p.add_argument("--input", required=True, help="complete panel CSV")
    p.add_argument("--out", required=True, help="output directory")
    _add_opts(p, ROLLING_OPTS)
    _add_common(p, threads=True)
    p.set_defaults(opts=ROLLING_OPTS, handler=cmd_rolling)

    p = sub.add_parser("regimes", help="one network and its analytics per regime")
    p.add_argument("--input", required=True, help="complete panel CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--rolling-dir", help="rolling run used by --regime-mode averaged (default: estimate it)")
    _add_opts(p, PIPELINE_OPTS + REGIME_OPTS)
    _add_common(p, threads=True)
    p.set_defaults(opts=PIPELINE_OPTS + REGIME_OPTS, handler=cmd_regimes)

    p = sub.add_parser("compare", help="per-window Jaccard similarity of two rolling runs")
    p.add_argument("--a", required=True, help="first rolling output directory")
    p.add_argument("--b", required=True, help="second rolling output directory")
    p.add_argument("--out", default=None, help="CSV path (default: jaccard.csv)")
    _add_common(p)
    p.set_defaults(opts=[], handler=cmd_compare)
    return parser


def resolve_params(args):
    """Defaults, then the config file, then explicit flags."""
    params = {key: default for _, key, _, default, _ in args.opts}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
        if isinstance(loaded, dict) and "config" in loaded and "tool" in loaded:
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise UsageError(f"config {path} must hold a JSON object")
        unknown = set(loaded) - set(params)
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(sorted(unknown))}")
        params.update(loaded)
    for _, key, _, _, _ in args.opts:
        v = getattr(args, key, None)
        if v is not None:
            params[key] = v
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _digests(paths, root=None):
    out = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.rglob("*")):
                if f.is_file() and f.name != "manifest.json" and not f.name.endswith(".tmp"):
                    out[str(f.relative_to(p))] = sha256_file(f)
        elif p.is_file():
            out[str(p)] = sha256_file(p)
    return out


def write_json_atomic(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


class RunManifest:
    """Config snapshot, input digests, seed, version and stage timings."""

    def __init__(self, command, argv):
        self.command = command
        self.argv = list(argv)
        self.config = {}
        self.inputs = {}
        self.outputs = {}
        self.results = {}
        self.timings = {}
        self.status = "running"
        self.error = None
        self.exit_code = None
        self.started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        log.info("%s: %s", self.command, name)
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def add_inputs(self, *paths):
        for p in paths:
            self.inputs[str(p)] = sha256_file(p)

    def seed(self):
        for key in ("master_seed", "seed"):
            if key in self.config:
                return self.config[key]
        return None

    def to_dict(self):
        return {
            "tool": "spillnet",
            "version": __version__,
            "command": self.command,
            "argv": self.argv,
            "config": self.config,
            "master_seed": self.seed(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "results": self.results,
            "timings": self.timings,
            "status": self.status,
            "error": self.error,
            "exit_code": self.exit_code,
            "started": self.started,
        }

    def write(self, path):
        write_json_atomic(path, self.to_dict())


def _need_file(path):
    if not Path(path).is_file():
        raise UsageError(f"input file not found: {path}")
    return Path(path)


def _pipeline_config(params):
    try:
        return PipelineConfig.from_dict(params)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _threads(args):
    n = args.threads if args.threads is not None else default_threads()
    if n < 1:
        raise UsageError("--threads must be >= 1")
    return n


def _progress(done, total):
    if done == total or done % max(1, total // 20) == 0:
        log.info("window %d/%d", done, total)


def cmd_stats(args, params, man):
    src = _need_file(args.input)
    man.add_inputs(src)
    with man.stage("load"):
        panel = load_panel(src)
    with man.stage("describe"):
        write_stats(panel, args.out)
    return [args.out]


def cmd_impute(args, params, man):
    src = _need_file(args.input)
    man.add_inputs(src)
    try:
        cfg = DecayConfig(**params)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc
    with man.stage("load"):
        panel = load_panel(src)
    with man.stage("impute"):
        out, report = impute_panel(panel, cfg, threads=_threads(args), return_report=True)
    for t, r in report.items():
        if r.n_imputed:
            log.info("%s: imputed %d, clamped %d, sigma %.6g", t, r.n_imputed, r.n_clamped, r.sigma)
    with man.stage("write"):
        save_panel(out, args.out)
    return [args.out]


def cmd_encode(args, params, man):
    src = _need_file(args.input)
    man.add_inputs(src)
    with man.stage("load"):
        panel = load_panel(src)
    if not panel.is_complete():
        raise DataError("panel has missing values; impute first")
    with man.stage("encode"):
        cols = [symbolize(panel.values[:, j], params["n_states"]).symbols for j in range(panel.n_series)]
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for t, d in enumerate(panel.dates):
            w.writerow([d.isoformat(), *(int(c[t]) for c in cols)])
    return [args.out]


def _date_index(panel, text, side):
    try:
        d = dt.date.fromisoformat(text)
    except ValueError as exc:
        raise UsageError(f"bad date {text!r}") from exc
    dates = np.array(panel.dates, dtype="datetime64[D]")
    return int(np.searchsorted(dates, np.datetime64(d, "D"), side=side))


def cmd_tepair(args, params, man):
    src = _need_file(args.input)
    if not params["source"] or not params["target"]:
        raise UsageError("--source and --target are required")
    man.add_inputs(src)
    with man.stage("load"):
        panel = load_panel(src)
    for name in (params["source"], params["target"]):
        if name not in panel.tickers:
            raise DataError(f"ticker {name!r} not in panel")
    lo = _date_index(panel, params["start_date"], "left") if params["start_date"] else 0
    hi = _date_index(panel, params["end_date"], "right") if params["end_date"] else panel.n_obs
    sub = panel.slice(lo, hi)
    if not sub.is_complete():
        raise DataError("selected rows have missing values; impute first")
    i, j = sub.tickers.index(params["source"]), sub.tickers.index(params["target"])
    with man.stage("estimate"):
        y = symbolize(sub.values[:, i], params["n_states"])
        z = symbolize(sub.values[:, j], params["n_states"])
        est = te_estimate(y, z, params["k"], params["l"])
        sig = te_pvalue(
            y, z, params["k"], params["l"], params["n_boot"], _rng.stream(params["seed"], _rng.PAIR, i, j),
            params["markov_order"], params["unobserved"],
        )
    body = {
        "source": params["source"],
        "target": params["target"],
        "start_date": sub.dates[0].isoformat(),
        "end_date": sub.dates[-1].isoformat(),
        "estimate": dataclasses.asdict(est),
        "significance": dataclasses.asdict(sig),
    }
    text = json.dumps(body, indent=1) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
        return [args.out]
    sys.stdout.write(text)
    return []


def cmd_calibrate(args, params, man):
    try:
        with man.stage("simulate"):
            cal = calibrate_lags(**params)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise UsageError(f"invalid configuration: {exc}") from exc
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_size", "lag", "ce_bits"])
        for n, lag, ce in cal.rows():
            w.writerow([n, lag, repr(ce)])
    log.info("recommended lag %d (read at n=%d)", cal.recommended_lag, cal.reference_size)
    man.results = {"recommended_lag": cal.recommended_lag, "reference_size": cal.reference_size}
    return [args.out]


def _load_complete(src, man):
    with man.stage("load"):
        panel = load_panel(src)
    if not panel.is_complete():
        raise DataError(f"{src} has missing values; run `spillnet impute` first")
    return panel


def cmd_rolling(args, params, man):
    src = _need_file(args.input)
    cfg = _pipeline_config(params)
    threads = _threads(args)
    man.add_inputs(src)
    panel = _load_complete(src, man)
    with man.stage("windows"):
        nets = run_rolling(panel, cfg, threads=threads, progress=_progress)
    with man.stage("metrics"):
        write_rolling(args.out, nets, metric_series(nets, filtered_degrees=cfg.filtered_measures))
    if cfg.regime_breaks:
        with man.stage("regimes"):
            write_regimes(args.out, regime_report(panel, cfg, nets))
    return [args.out]


def cmd_regimes(args, params, man):
    src = _need_file(args.input)
    cfg = _pipeline_config(params)
    threads = _threads(args)
    man.add_inputs(src)
    panel = _load_complete(src, man)
    nets = None
    if cfg.regime_mode == "averaged":
        if args.rolling_dir:
            nets = load_networks(args.rolling_dir)
        else:
            with man.stage("windows"):
                nets = run_rolling(panel, cfg, threads=threads, progress=_progress)
    with man.stage("regimes"):
        write_regimes(args.out, regime_report(panel, cfg, nets))
    return [args.out]


def cmd_compare(args, params, man):
    for d in (args.a, args.b):
        if not Path(d).is_dir():
            raise UsageError(f"run directory not found: {d}")
    for d in (args.a, args.b):
        for f in sorted((Path(d) / "networks").glob("window_*.json")):
            man.inputs[str(f)] = sha256_file(f)
    out = args.out or "jaccard.csv"
    with man.stage("compare"):
        compare_runs(args.a, args.b, out)
    return [out]


def _manifest_path(args):
    if args.manifest:
        return Path(args.manifest)
    if args.command in ("rolling", "regimes"):
        return Path(args.out) / "manifest.json"
    out = getattr(args, "out", None) or ("jaccard.csv" if args.command == "compare" else None)
    if out:
        return Path(str(out) + ".manifest.json")
    return Path(f"{args.command}.manifest.json")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    man = RunManifest(args.command, argv)
    code = EXIT_OK
    try:
        params = resolve_params(args)
        man.config = params
        outputs = args.handler(args, params, man)
        man.outputs = _digests(outputs)
        man.status = "ok"
    except UsageError as exc:
        code, man.error = EXIT_USAGE, str(exc)
    except NumericalError as exc:
        code, man.error = EXIT_NUMERICAL, str(exc)
    except (SpillnetError, DataError) as exc:
        code, man.error = EXIT_DATA, str(exc)
    except OSError as exc:
        code, man.error = EXIT_DATA, str(exc)
    if code != EXIT_OK:
        man.status = "error"
        log.error("%s", man.error)
    man.exit_code = code
    try:
        man.write(_manifest_path(args))
    except OSError as exc:
        log.error("could not write manifest: %s", exc)
        code = code or EXIT_DATA
    return code


if __name__ == "__main__":
    sys.exit(main())
