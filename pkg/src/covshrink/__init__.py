"""Spectral covariance shrinkage estimators (ridge mixtures fitted by
cross-validated Sharpe objectives, oracle-eigenvalue averages, and their
combinations) with a strict walk-forward max-Sharpe backtesting harness."""

from .average_oracle import (
    AoPrefilter,
    OracleHistory,
    OracleRecord,
    ao_eigenvalues,
    ao_filter,
    build_oracle_history,
    oracle_eigenvalues,
)
from .backtest import (
    BacktestConfig,
    BacktestResult,
    EstimatorKind,
    EstimatorSeries,
    EstimatorSpec,
    generate_synthetic_panel,
    run_backtest,
    sweep_grid_lower_bound,
    sweep_window_length,
)
from .data_ingest import (
    ReturnsPanel,
    WindowSplit,
    load_returns_csv,
    panel_to_csv,
    slice_rows,
    walk_forward_splits,
)
from .errors import ConfigError, DataError, NumericError, ToolkitError
from .portfolio import (
    Portfolio,
    PortfolioMetrics,
    max_drawdown,
    max_sharpe_portfolio,
    oos_sharpe,
    scaled_cumulative_log_returns,
    turnover,
)
from .ridge import PenaltyGrid, RidgeWeights, herfindahl, log_grid, shrink_eigenvalues
from .spectral import (
    EigenSystem,
    SampleMoments,
    corr_to_cov,
    cov_to_corr,
    eig_sym,
    reconstruct,
    sample_moments,
)
from .stats_tests import (
    MCSResult,
    PairedSeries,
    WilcoxonResult,
    model_confidence_set,
    wilcoxon_one_sided,
    wilcoxon_test,
)
from .upsa import (
    BasisReturnMoments,
    WeightHistory,
    average_weights,
    loo_basis_returns,
    mixture_covariance,
    solve_simplex_qp,
    upsa_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "AoPrefilter",
    "BacktestConfig",
    "BacktestResult",
    "BasisReturnMoments",
    "ConfigError",
    "DataError",
    "EigenSystem",
    "EstimatorKind",
    "EstimatorSeries",
    "EstimatorSpec",
    "MCSResult",
    "NumericError",
    "OracleHistory",
    "OracleRecord",
    "PairedSeries",
    "PenaltyGrid",
    "Portfolio",
    "PortfolioMetrics",
    "ReturnsPanel",
    "RidgeWeights",
    "SampleMoments",
    "ToolkitError",
    "WeightHistory",
    "WilcoxonResult",
    "WindowSplit",
    "ao_eigenvalues",
    "ao_filter",
    "average_weights",
    "build_oracle_history",
    "corr_to_cov",
    "cov_to_corr",
    "eig_sym",
    "generate_synthetic_panel",
    "herfindahl",
    "load_returns_csv",
    "log_grid",
    "loo_basis_returns",
    "max_drawdown",
    "max_sharpe_portfolio",
    "mixture_covariance",
    "model_confidence_set",
    "oos_sharpe",
    "oracle_eigenvalues",
    "panel_to_csv",
    "reconstruct",
    "run_backtest",
    "sample_moments",
    "scaled_cumulative_log_returns",
    "shrink_eigenvalues",
    "slice_rows",
    "solve_simplex_qp",
    "sweep_grid_lower_bound",
    "sweep_window_length",
    "turnover",
    "upsa_covariance",
    "walk_forward_splits",
    "wilcoxon_one_sided",
    "wilcoxon_test",
]
