"""Transfer-entropy spillover networks for sentiment panels."""

__version__ = "0.1.0"

from .encoding import CollapsedStatesWarning, SymbolSeries, encode, quantile_thresholds, symbolize
from .entropy import (
    LagCalibration,
    TeEstimate,
    calibrate_lags,
    conditional_entropy,
    normalized_te,
    shannon_entropy,
    te_estimate,
    transfer_entropy,
)
from .errors import (
    ConditioningError,
    ConvergenceError,
    DataError,
    DegenerateSeriesError,
    InsufficientDataError,
    NumericalError,
    PanelParseError,
    SpillnetError,
)
from .graph import (
    Arborescence,
    PowerSum,
    SpilloverNetwork,
    build_network,
    density,
    jaccard,
    max_spanning_arborescence,
    pagerank,
    power_sum,
    spectral_radius,
    top_influencers,
    weighted_degrees,
)
from .imputation import DecayConfig, impute_decay, impute_panel
from .panel import Ar1Fit, SentimentPanel, StatsSummary, describe, fit_ar1, load_panel, save_panel, simulate_ar1
from .pipeline import (
    MetricSeries,
    PipelineConfig,
    Window,
    compare_runs,
    enumerate_windows,
    metric_series,
    regime_report,
    run_rolling,
    window_network,
    write_regimes,
    write_rolling,
)
from .significance import MarkovModel, SignificanceResult, fit_markov, pairwise_significance, simulate, te_pvalue
