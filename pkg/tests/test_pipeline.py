import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spillnet import (
    DataError,
    InsufficientDataError,
    PipelineConfig,
    build_network,
    compare_runs,
    enumerate_windows,
    metric_series,
    regime_report,
    run_rolling,
    window_network,
    write_regimes,
    write_rolling,
)
from spillnet.pipeline import load_networks, n_windows
from spillnet.synthetic import hub_couplings, make_panel


def fast(**kw):
    return PipelineConfig(**{"n_boot": 20, **kw})


@given(st.integers(1, 3000), st.integers(3, 400), st.integers(1, 50))
def test_window_count_formula(T, L, step):
    expect = (T - L) // step + 1 if T >= L else 0
    assert n_windows(T, L, step) == expect


def test_full_panel_window_count():
    panel = make_panel(n_series=2, n_obs=1319, seed=0)
    ws = enumerate_windows(panel, PipelineConfig())
    assert len(ws) == 112
    assert (ws[0].start, ws[0].end, ws[1].start, ws[1].end) == (0, 199, 10, 209)
    assert ws[-1].end == 1309 and ws[-1].end_date == panel.dates[1309]
    assert all(w.length == 200 for w in ws)


def test_window_edge_cases():
    assert len(enumerate_windows(make_panel(n_series=2, n_obs=200), PipelineConfig())) == 1
    with pytest.raises(InsufficientDataError):
        enumerate_windows(make_panel(n_series=2, n_obs=199), PipelineConfig())


def test_config_round_trip_and_validation():
    cfg = PipelineConfig(n_boot=50, regime_breaks=("2021-08-02", "2022-10-03"))
    assert PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    assert cfg.regime_breaks[0] == dt.date(2021, 8, 2)
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({"widow": 3})
    for bad in ({"alpha": 1.0}, {"step": 0}, {"regime_breaks": ("2022-01-01", "2021-01-01")},
                {"regime_mode": "mean"}, {"n_boot": 0}):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)


def test_window_network_full_pair_count():
    panel = make_panel(n_series=34, n_obs=200, seed=1)
    w = enumerate_windows(panel, PipelineConfig())[0]
    net = window_network(panel, w, fast(n_boot=5))
    off = ~np.eye(34, dtype=bool)
    assert np.isfinite(net.pvalues[off]).sum() == 1122
    assert net.n == 34 and net.window == (panel.dates[0], panel.dates[199])


def test_missing_values_rejected():
    panel = make_panel(n_series=3, n_obs=250, missing=0.01, seed=1)
    with pytest.raises(DataError, match="impute"):
        run_rolling(panel, fast())


def test_constant_column_excluded(caplog):
    panel = make_panel(n_series=4, n_obs=220, seed=2)
    vals = panel.values.copy()
    vals[:, 2] = 0.1
    p = type(panel)(panel.dates, panel.tickers, vals)
    net = window_network(p, enumerate_windows(p, PipelineConfig())[0], fast())
    assert net.excluded == (panel.tickers[2],)
    assert not net.weights[2].any() and not net.weights[:, 2].any()
    assert np.isnan(net.pvalues[2]).all()
    assert "excluded" in caplog.text
    full = window_network(panel, enumerate_windows(panel, PipelineConfig())[0], fast())
    keep = [0, 1, 3]
    assert np.array_equal(full.te[np.ix_(keep, keep)], net.te[np.ix_(keep, keep)])


def test_rolling_deterministic_across_workers():
    panel = make_panel(n_series=5, n_obs=260, seed=3)
    cfg = fast(step=20)
    a = run_rolling(panel, cfg, threads=1)
    b = run_rolling(panel, cfg, threads=3)
    assert len(a) == 4
    assert [n.to_json() for n in a] == [n.to_json() for n in b]
    c = run_rolling(panel, PipelineConfig(n_boot=20, step=20, master_seed=1))
    assert [n.to_json() for n in a] != [n.to_json() for n in c]


def test_global_thresholds_option():
    panel = make_panel(n_series=3, n_obs=260, seed=4)
    a = run_rolling(panel, fast(step=30))
    b = run_rolling(panel, fast(step=30, global_thresholds=True))
    assert len(a) == len(b) == 3
    assert any(not np.array_equal(x.te, y.te) for x, y in zip(a, b))


def test_planted_coupling_significant_in_most_windows():
    panel = make_panel(n_series=4, n_obs=400, couplings={("AAPL", "MSFT"): 0.6}, seed=5)
    nets = run_rolling(panel, PipelineConfig(step=20))
    hits = [n.significant[0, 1] for n in nets]
    assert len(nets) == 11
    assert np.mean(hits) >= 0.9


def fixture_net(edges, labels=("A", "B", "C"), end="2020-01-10"):
    n = len(labels)
    w = np.zeros((n, n))
    p = np.ones((n, n))
    for a, b, wt in edges:
        w[labels.index(a), labels.index(b)] = wt
        p[labels.index(a), labels.index(b)] = 0.0
    return build_network(w, p, 0.1, labels, window=("2020-01-01", end))


def test_metric_series_hand_fixture():
    n1 = fixture_net([("A", "B", 0.6), ("B", "C", 0.3)])
    n2 = fixture_net([("A", "B", 0.3), ("C", "A", 0.6)], end="2020-01-20")
    m = metric_series([n1, n2])
    assert m.density_filtered.tolist() == pytest.approx([0.15, 0.15])
    assert m.edge_counts.tolist() == [2, 2]
    assert np.isnan(m.jaccard_consecutive[0])
    assert m.jaccard_consecutive[1] == pytest.approx(1 / 3)
    assert m.out_degree[0].tolist() == pytest.approx([0.6, 0.3, 0.0])
    assert m.in_degree[1].tolist() == pytest.approx([0.6, 0.3, 0.0])
    assert m.window_end_dates == ["2020-01-10", "2020-01-20"]
    single = metric_series([n1])
    assert single.density_filtered.shape == (1,)


def test_metric_series_empty_networks():
    m = metric_series([fixture_net([]), fixture_net([])])
    assert m.density_filtered.tolist() == [0, 0]
    assert m.jaccard_consecutive[1] == 1


def test_rolling_artifacts_and_compare(tmp_path):
    a = [fixture_net([("A", "B", 0.6), ("B", "C", 0.3)]), fixture_net([("A", "C", 0.2)])]
    b = [fixture_net([("A", "B", 0.5)]), fixture_net([("C", "B", 0.4)])]
    write_rolling(tmp_path / "a", a)
    write_rolling(tmp_path / "b", b)
    for name in ("density.csv", "degrees_in.csv", "degrees_out.csv", "jaccard.csv"):
        assert (tmp_path / "a" / "metrics" / name).is_file()
    assert sorted(p.name for p in (tmp_path / "a" / "networks").iterdir()) == ["window_000.json", "window_001.json"]
    back = load_networks(tmp_path / "a")
    assert [n.to_json() for n in back] == [n.to_json() for n in a]
    jac = compare_runs(tmp_path / "a", tmp_path / "b", tmp_path / "jaccard.csv")
    # {AB, BC} vs {AB}: 1/2; {AC} vs {CB}: 0
    assert jac.tolist() == [0.5, 0.0]
    lines = (tmp_path / "jaccard.csv").read_text().splitlines()
    assert lines[0] == "window,end_date_a,end_date_b,jaccard_filtered,jaccard_unfiltered"
    m = metric_series(a, other=b)
    assert m.jaccard_cross.tolist() == [0.5, 0.0]


def test_compare_mismatched_window_counts(tmp_path):
    write_rolling(tmp_path / "a", [fixture_net([])])
    write_rolling(tmp_path / "b", [fixture_net([]), fixture_net([])])
    with pytest.raises(DataError):
        compare_runs(tmp_path / "a", tmp_path / "b", tmp_path / "j.csv")


def test_two_breaks_give_three_regimes(tmp_path):
    panel = make_panel(n_series=4, n_obs=1319, seed=6)
    cfg = fast(regime_breaks=("2021-08-02", "2022-10-03"))
    reps = regime_report(panel, cfg)
    assert [r["name"] for r in reps] == ["regime_1", "regime_2", "regime_3"]
    assert reps[0]["end"] < "2021-08-02" <= reps[1]["start"]
    assert reps[1]["end"] < "2022-10-03" <= reps[2]["start"]
    assert sum(r["n_obs"] for r in reps) == 1319
    for r in reps:
        arb = r["_arborescence"]
        parents = {p for p, _ in arb.parent.values()}
        assert r["path_stats"]["n_paths"] == len([v for v in arb.parent if v not in parents])
        assert len(r["centrality"]) == 4
    write_regimes(tmp_path, reps)
    for r in reps:
        d = tmp_path / "regimes" / r["name"]
        assert {p.name for p in d.iterdir()} >= {"report.json", "msa.dot", "centrality.csv", "paths.csv"}
        body = json.loads((d / "report.json").read_text())
        assert body["msa"]["root"] == r["_arborescence"].root


def test_planted_hub_tops_regime_tables():
    followers = ["AAPL", "MSFT", "GOOGL", "TSLA", "META"]
    panel = make_panel(n_series=10, n_obs=600, couplings=hub_couplings("NVDA", followers), seed=7)
    cfg = fast(n_boot=50, regime_breaks=(panel.dates[300],))
    for rep in regime_report(panel, cfg):
        assert rep["top_influencers"]["pagerank"][0]["label"] == "NVDA"
        assert rep["top_influencers"]["out_degree"][0]["label"] == "NVDA"
        assert rep["msa"]["root"] == "NVDA"


def test_short_regime_named_in_error():
    panel = make_panel(n_series=3, n_obs=300, seed=8)
    cfg = fast(regime_breaks=(panel.dates[20],))
    with pytest.raises(InsufficientDataError, match="regime_1"):
        regime_report(panel, cfg)


def test_break_outside_panel():
    panel = make_panel(n_series=3, n_obs=300, seed=8)
    with pytest.raises(DataError, match="outside"):
        regime_report(panel, fast(regime_breaks=("2030-01-01",)))


def test_averaged_regime_mode():
    panel = make_panel(n_series=4, n_obs=500, seed=9)
    cfg = fast(step=50, regime_mode="averaged", regime_breaks=(panel.dates[300],))
    nets = run_rolling(panel, cfg)
    reps = regime_report(panel, cfg, nets)
    inside = [n for n in nets if n.window[1] <= panel.dates[299]]
    w = np.mean([n.weights for n in inside], axis=0)
    assert np.allclose(reps[0]["_network"].weights, w)
    with pytest.raises(ValueError):
        regime_report(panel, cfg)
