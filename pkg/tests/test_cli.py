import csv
import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from spillnet import _rng, cli, load_panel, save_panel, symbolize, te_estimate, te_pvalue
from spillnet.errors import ConvergenceError
from spillnet.pipeline import write_rolling
from spillnet.synthetic import make_panel

from test_pipeline import fixture_net

SUBCOMMANDS = ["stats", "impute", "encode", "tepair", "calibrate", "rolling", "regimes", "compare"]


@pytest.fixture
def panels(tmp_path):
    raw = make_panel(n_series=4, n_obs=260, missing=0.03, seed=1)
    full = make_panel(n_series=4, n_obs=260, couplings={("AAPL", "MSFT"): 0.7}, seed=2)
    save_panel(raw, tmp_path / "raw.csv")
    save_panel(full, tmp_path / "panel.csv")
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def tree_digest(root, skip=("manifest.json",)):
    out = {}
    for f in sorted(root.rglob("*")):
        if f.is_file() and f.name not in skip:
            out[str(f.relative_to(root))] = hashlib.sha256(f.read_bytes()).hexdigest()
    return out


@pytest.mark.parametrize("sub", SUBCOMMANDS)
def test_help_lists_defaults(sub, capsys):
    with pytest.raises(SystemExit) as info:
        run(sub, "--help")
    assert info.value.code == 0
    assert "usage:" in capsys.readouterr().out
    parser = cli.build_parser()
    subparser = next(a for a in parser._actions if a.dest == "command").choices[sub]
    for action in subparser._actions:
        if not action.option_strings or action.dest == "help" or action.required:
            continue
        assert "(default:" in action.help, action.option_strings


def test_help_defaults_match_documented_values(capsys):
    with pytest.raises(SystemExit):
        run("rolling", "--help")
    text = " ".join(capsys.readouterr().out.split())
    for frag in ("window length in observations (default: 200)", "(default: 10)", "(default: 0.1)",
                 "replications per ordered pair (default: 300)", "number of quantile states (default: 3)"):
        assert frag in text
    with pytest.raises(SystemExit):
        run("impute", "--help")
    text = " ".join(capsys.readouterr().out.split())
    assert "decay rate (default: 0.23)" in text
    assert "--leading-fill {error,zero}" in text


def test_usage_errors_exit_1(panels, capsys):
    with pytest.raises(SystemExit) as info:
        run("rolling", "--input", panels / "panel.csv", "--out", panels / "o", "--bogus")
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run("nosuch")
    assert info.value.code == 1
    assert run("rolling", "--input", panels / "missing.csv", "--out", panels / "o") == 1
    assert run("rolling", "--input", panels / "panel.csv", "--out", panels / "o2", "--alpha", "1.5") == 1
    bad = panels / "bad.json"
    bad.write_text(json.dumps({"window_length": 200, "nonsense": 1}))
    assert run("rolling", "--input", panels / "panel.csv", "--out", panels / "o3", "--config", bad) == 1
    man = json.loads((panels / "o3" / "manifest.json").read_text())
    assert man["status"] == "error" and "nonsense" in man["error"] and man["exit_code"] == 1


def test_data_error_exit_2(panels):
    (panels / "oor.csv").write_text("date,A,B\n2020-01-01,0.1,1.5\n")
    assert run("stats", "--input", panels / "oor.csv", "--out", panels / "s.csv") == 2
    man = json.loads((panels / "s.csv.manifest.json").read_text())
    assert "row 2" in man["error"] and man["status"] == "error"
    assert run("rolling", "--input", panels / "raw.csv", "--out", panels / "r") == 2


def test_numerical_error_exit_3(panels, monkeypatch):
    def boom(*a, **k):
        raise ConvergenceError("did not converge")

    monkeypatch.setattr(cli, "run_rolling", boom)
    assert run("rolling", "--input", panels / "panel.csv", "--out", panels / "r") == 3
    man = json.loads((panels / "r" / "manifest.json").read_text())
    assert man["exit_code"] == 3


def test_rolling_artifacts_manifest_and_rerun(panels, capsys):
    out = panels / "r1"
    argv = ["rolling", "--input", panels / "panel.csv", "--out", out, "--n-boot", 30, "--step", 30,
            "--seed", 42, "--threads", 1, "--breaks", "2020-03-02"]
    assert run(*argv) == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    for rel in ("metrics/density.csv", "metrics/degrees_in.csv", "metrics/degrees_out.csv",
                "metrics/jaccard.csv", "networks/window_000.json", "regimes/regime_1/report.json",
                "regimes/regime_2/msa.dot"):
        assert (out / rel).is_file(), rel
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["master_seed"] == 42 and man["version"]
    assert man["config"]["n_boot"] == 30 and man["config"]["window_length"] == 200
    digest = hashlib.sha256((panels / "panel.csv").read_bytes()).hexdigest()
    assert list(man["inputs"].values()) == [digest]
    assert set(man["timings"]) >= {"load", "windows", "metrics", "regimes"}
    assert man["outputs"] == tree_digest(out)
    assert not list(out.glob("*.tmp"))

    rerun = panels / "r2"
    assert run("rolling", "--input", panels / "panel.csv", "--out", rerun, "--config", out / "manifest.json",
               "--threads", 2) == 0
    assert tree_digest(out) == tree_digest(rerun)

    again = panels / "r3"
    assert run("rolling", "--input", panels / "panel.csv", "--out", again, "--config", out / "manifest.json",
               "--n-boot", 31) == 0
    assert json.loads((again / "manifest.json").read_text())["config"]["n_boot"] == 31


def test_plain_config_file(panels):
    cfg = panels / "cfg.json"
    cfg.write_text(json.dumps({"n_boot": 10, "step": 60, "master_seed": 3}))
    assert run("rolling", "--input", panels / "panel.csv", "--out", panels / "c", "--config", cfg) == 0
    man = json.loads((panels / "c" / "manifest.json").read_text())
    assert (man["config"]["n_boot"], man["config"]["step"], man["master_seed"]) == (10, 60, 3)
    assert len(list((panels / "c" / "networks").glob("*.json"))) == 2


def test_regimes_subcommand(panels):
    assert run("regimes", "--input", panels / "panel.csv", "--out", panels / "g", "--breaks", "2020-03-02",
               "--n-boot", 20) == 0
    names = sorted(p.name for p in (panels / "g" / "regimes").iterdir())
    assert names == ["regime_1", "regime_2"]
    assert run("regimes", "--input", panels / "panel.csv", "--out", panels / "g2", "--breaks", "2020-03-02",
               "--n-boot", 10, "--window", 60, "--step", 20, "--regime-mode", "averaged") == 0
    rep = json.loads((panels / "g2" / "regimes" / "regime_2" / "report.json").read_text())
    assert rep["mode"] == "averaged"


def test_impute_subcommand(panels):
    assert run("impute", panels / "raw.csv", panels / "imp.csv", "--lambda", 0.23, "--noise", "gaussian",
               "--seed", 7) == 0
    with open(panels / "raw.csv") as a, open(panels / "imp.csv") as b:
        ra, rb = list(csv.reader(a)), list(csv.reader(b))
    assert ra[0] == rb[0] and len(ra) == len(rb)
    assert all(cell != "" for row in rb for cell in row)
    first = (panels / "imp.csv").read_bytes()
    assert run("impute", panels / "raw.csv", panels / "imp.csv", "--seed", 7, "--threads", 4) == 0
    assert (panels / "imp.csv").read_bytes() == first
    man = json.loads((panels / "imp.csv.manifest.json").read_text())
    assert man["config"]["rate"] == 0.23 and man["config"]["noise"] == "gaussian"


def test_encode_and_stats(panels):
    assert run("encode", "--input", panels / "panel.csv", "--out", panels / "sym.csv") == 0
    rows = list(csv.reader(open(panels / "sym.csv")))
    panel = load_panel(panels / "panel.csv")
    col = [int(r[1]) for r in rows[1:]]
    assert col == symbolize(panel.values[:, 0]).symbols.tolist()
    assert run("stats", "--input", panels / "raw.csv", "--out", panels / "st.csv") == 0
    assert len(list(csv.reader(open(panels / "st.csv")))) == 5


def test_tepair_json_matches_library(panels, capsys):
    assert run("tepair", "--input", panels / "panel.csv", "--source", "AAPL", "--target", "MSFT",
               "--n-boot", 100, "--seed", 3, "--manifest", panels / "tp.json") == 0
    body = json.loads(capsys.readouterr().out)
    panel = load_panel(panels / "panel.csv")
    y, z = symbolize(panel.values[:, 0]), symbolize(panel.values[:, 1])
    assert body["estimate"]["te_bits"] == te_estimate(y, z).te_bits
    ref = te_pvalue(y, z, n_boot=100, rng=_rng.stream(3, _rng.PAIR, 0, 1))
    assert body["significance"]["p_value"] == ref.p_value
    assert (panels / "tp.json").is_file()
    assert run("tepair", "--input", panels / "panel.csv", "--source", "AAPL", "--target", "NOPE",
               "--manifest", panels / "tp2.json") == 2
    assert run("tepair", "--input", panels / "panel.csv", "--manifest", panels / "tp3.json") == 1


def test_calibrate_csv(panels):
    out = panels / "cal.csv"
    assert run("calibrate", "--out", out, "--sample-sizes", "100,500", "--max-lag", 4) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == ["sample_size", "lag", "ce_bits"]
    assert len(rows) == 9
    ce = np.array([float(r[2]) for r in rows[1:]]).reshape(2, 4)
    assert np.all(np.diff(ce, axis=1) <= 1e-12)
    man = json.loads((panels / "cal.csv.manifest.json").read_text())
    assert man["results"]["recommended_lag"] >= 1
    assert run("calibrate", "--out", out, "--psi1", 1.2) == 1


def test_compare_subcommand(tmp_path):
    a = [fixture_net([("A", "B", 0.6), ("B", "C", 0.3), ("C", "A", 0.1)]), fixture_net([])]
    b = [fixture_net([("A", "B", 0.5), ("B", "C", 0.2), ("A", "C", 0.2)]), fixture_net([("A", "C", 0.1)])]
    write_rolling(tmp_path / "news", a)
    write_rolling(tmp_path / "social", b)
    assert run("compare", "--a", tmp_path / "news", "--b", tmp_path / "social", "--out", tmp_path / "j.csv") == 0
    rows = list(csv.DictReader(open(tmp_path / "j.csv")))
    ea = [{("A", "B"), ("B", "C"), ("C", "A")}, set()]
    eb = [{("A", "B"), ("B", "C"), ("A", "C")}, {("A", "C")}]
    for r, x, y in zip(rows, ea, eb):
        assert float(r["jaccard_filtered"]) == len(x & y) / len(x | y)
    assert run("compare", "--a", tmp_path / "news", "--b", tmp_path / "nope", "--out", tmp_path / "k.csv") == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "spillnet.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("spillnet ")
    res = subprocess.run([sys.executable, "-m", "spillnet.cli", "rolling"], capture_output=True, text=True)
    assert res.returncode == 1 and "required" in res.stderr
