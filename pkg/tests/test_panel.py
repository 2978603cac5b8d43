import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats as sps

from spillnet import (
    DegenerateSeriesError,
    InsufficientDataError,
    PanelParseError,
    SentimentPanel,
    describe,
    fit_ar1,
    load_panel,
    save_panel,
    simulate_ar1,
)
from spillnet.panel import STATS_FIELDS, write_stats
from spillnet.synthetic import make_panel


def write(tmp_path, text, name="p.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_marks_empty_cell_missing(tmp_path):
    p = write(tmp_path, "date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,,0.3\n2020-01-03,-0.5,1\n")
    panel = load_panel(p)
    assert panel.tickers == ("A", "B")
    assert panel.values.shape == (3, 2)
    assert np.isnan(panel.values[1, 0])
    assert np.isnan(panel.values).sum() == 1
    assert panel.values[2, 1] == 1.0


def test_load_sorts_rows(tmp_path):
    p = write(tmp_path, "date,A\n2020-01-03,0.3\n2020-01-01,0.1\n2020-01-02,0.2\n")
    panel = load_panel(p)
    assert panel.dates == (dt.date(2020, 1, 1), dt.date(2020, 1, 2), dt.date(2020, 1, 3))
    assert panel.values[:, 0].tolist() == [0.1, 0.2, 0.3]


@pytest.mark.parametrize(
    "text, row, column",
    [
        ("date,A,B\n2020-01-01,0.1,1.5\n", 2, "B"),
        ("date,A,B\n2020-01-01,0.1,0.2\n2020-01-02,-1.01,0\n", 3, "A"),
        ("date,A\n2020-01-01,abc\n", 2, "A"),
        ("date,A\n2020-13-01,0.1\n", 2, "date"),
        ("date,A\n2020-01-01,0.1\n2020-01-01,0.2\n", 3, "date"),
        ("date,A,A\n2020-01-01,0.1,0.2\n", 1, "A"),
    ],
)
def test_parse_errors_name_row_and_column(tmp_path, text, row, column):
    with pytest.raises(PanelParseError) as info:
        load_panel(write(tmp_path, text))
    assert info.value.row == row
    assert info.value.column == column
    assert f"row {row}" in str(info.value)


def test_range_error_message(tmp_path):
    with pytest.raises(PanelParseError, match="outside"):
        load_panel(write(tmp_path, "date,A,B\n2020-01-01,0.1,1.5\n"))


def test_panel_validates_invariants():
    d = [dt.date(2020, 1, 1), dt.date(2020, 1, 2)]
    with pytest.raises(ValueError):
        SentimentPanel(d[::-1], ["A"], [[0.1], [0.2]])
    with pytest.raises(ValueError):
        SentimentPanel(d, ["A", "A"], [[0.1, 0.1], [0.2, 0.2]])
    with pytest.raises(ValueError):
        SentimentPanel(d, ["A"], [[0.1], [2.0]])
    p = SentimentPanel(d, ["A"], [[0.1], [np.nan]])
    with pytest.raises(ValueError):
        p.values[0, 0] = 0.5


@settings(max_examples=30, deadline=None)
@given(
    st.lists(
        st.lists(st.one_of(st.none(), st.floats(-1, 1, allow_nan=False)), min_size=3, max_size=3),
        min_size=1,
        max_size=20,
    )
)
def test_round_trip_is_bit_exact(tmp_path_factory, rows):
    vals = np.array([[np.nan if v is None else v for v in r] for r in rows], dtype=float)
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(len(rows))]
    panel = SentimentPanel(dates, ["A", "B", "C"], vals)
    path = tmp_path_factory.mktemp("rt") / "p.csv"
    save_panel(panel, path)
    back = load_panel(path)
    assert back.dates == panel.dates
    assert np.array_equal(back.values, panel.values, equal_nan=True)
    assert np.array_equal(np.signbit(back.values), np.signbit(panel.values))


def test_full_scale_missing_fractions(tmp_path):
    fracs = np.linspace(0.00758, 0.2456, 34)
    panel = make_panel(n_series=34, n_obs=1319, missing=fracs, seed=3)
    save_panel(panel, tmp_path / "p.csv")
    back = load_panel(tmp_path / "p.csv")
    mf = back.missing_fraction()
    assert back.values.shape == (1319, 34)
    assert mf.min() == pytest.approx(0.00758, abs=1 / 1319)
    assert mf.max() == pytest.approx(0.2456, abs=1 / 1319)


def test_describe_constant_series_is_degenerate():
    s = describe([0, 0, 0, 0])
    assert s.mean == 0 and s.sd == 0
    assert s.skewness == 0 and s.kurtosis == 0
    assert s.degenerate


def test_describe_symmetric():
    s = describe([-1, 0, 1])
    assert (s.mean, s.min, s.max) == (0, -1, 1)
    assert s.skewness == 0


def test_describe_counts_missing():
    s = describe([0.1, np.nan, 0.3, np.nan])
    assert s.n_missing == 2
    assert s.missing_fraction == 0.5
    assert s.mean == pytest.approx(0.2)


def test_describe_needs_two_values():
    with pytest.raises(InsufficientDataError):
        describe([np.nan, np.nan, 0.2])


def test_describe_matches_moment_oracle():
    rng = np.random.default_rng(7)
    x = np.where(rng.random(100_000) < 0.8, rng.normal(-0.1, 0.1, 100_000), rng.normal(0.4, 0.2, 100_000))
    x = np.clip(x, -1, 1)
    s = describe(x)
    assert s.skewness == pytest.approx(sps.skew(x), rel=0.05)
    assert s.kurtosis == pytest.approx(sps.kurtosis(x, fisher=True), rel=0.05)
    assert s.sd == pytest.approx(np.std(x, ddof=1), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=3, max_size=50))
def test_describe_quantile_order(values):
    if len(set(values)) < 3:
        return
    s = describe(values)
    med = float(np.median(values))
    assert s.min <= s.q25 <= med <= s.q75 <= s.max
    assert s.sd >= 0


def test_write_stats_fixed_field_order(tmp_path):
    panel = make_panel(n_series=3, n_obs=50, seed=1)
    write_stats(panel, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].split(",") == ["ticker", *STATS_FIELDS]
    assert len(lines) == 4


@pytest.mark.parametrize("psi1", [0.0, 0.5])
def test_fit_ar1_recovers_parameters(psi1):
    x = simulate_ar1(100_000, psi1, 0.1, np.random.default_rng(11))
    fit = fit_ar1(x)
    assert abs(fit.psi1 - psi1) < 0.02
    assert abs(fit.sigma - 0.1) / 0.1 < 0.03
    assert fit.n_used == 99_999


def test_fit_ar1_error_shrinks_with_n():
    errs = []
    for n in (1_000, 10_000, 100_000):
        e = [abs(fit_ar1(simulate_ar1(n, 0.5, 0.1, np.random.default_rng(s))).psi1 - 0.5) for s in range(10)]
        errs.append(np.mean(e))
    assert errs[0] > errs[1] > errs[2]


def test_fit_ar1_variance_identity():
    x = simulate_ar1(100_000, 0.5, 0.1, np.random.default_rng(5))
    fit = fit_ar1(x)
    v = x.var()
    assert abs(v - fit.implied_variance()) / v < 0.05


def test_fit_ar1_skips_pairs_with_gaps():
    x = simulate_ar1(5_000, 0.5, 0.1, np.random.default_rng(2))
    gappy = x.copy()
    gappy[::7] = np.nan
    fit = fit_ar1(gappy)
    assert fit.n_used == sum(
        1 for t in range(1, x.size) if not (math.isnan(gappy[t]) or math.isnan(gappy[t - 1]))
    )
    assert abs(fit.psi1 - 0.5) < 0.05


def test_fit_ar1_errors():
    with pytest.raises(DegenerateSeriesError):
        fit_ar1(np.zeros(20))
    with pytest.raises(InsufficientDataError):
        fit_ar1(np.arange(9) / 10)
