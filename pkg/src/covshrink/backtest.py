"""Walk-forward backtesting of the spectral shrinkage estimators.

The engine runs in phases so that no computation for a rebalance date can
see data after that date's holding window: oracle records and per-date
mixture weights are computed from calibration data only (parallelizable,
order-independent), then a sequential pass assembles weight histories,
portfolios, and out-of-sample statistics in date order.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

from .average_oracle import AoPrefilter, OracleHistory, OracleRecord, _oracle_record, ao_eigenvalues
from .data_ingest import ReturnsPanel, WindowSplit, slice_rows, walk_forward_splits
from .errors import ConfigError, EstimatorFailureError, ToolkitError
from .portfolio import (
    Portfolio,
    PortfolioMetrics,
    max_sharpe_portfolio,
    oos_sharpe,
    scaled_cumulative_log_returns,
    summarize_portfolio_series,
)
from .ridge import PenaltyGrid, RidgeWeights, log_grid
from .spectral import EigenSystem, corr_to_cov, cov_to_corr, eig_sym, sample_moments
from .upsa import WeightHistory, average_weights, loo_basis_returns, mixture_covariance, solve_simplex_qp

logger = logging.getLogger(__name__)


class EstimatorKind(str, Enum):
    UPSA = "UPSA"
    AVG_UPSA = "AvgUPSA"
    AO = "AO"
    UPSA_AO = "UPSA-AO"
    AVG_UPSA_AO = "AvgUPSA-AO"
    SAMPLE_COV = "SampleCov"


RIDGE_KINDS = {
    EstimatorKind.UPSA,
    EstimatorKind.AVG_UPSA,
    EstimatorKind.UPSA_AO,
    EstimatorKind.AVG_UPSA_AO,
}
AO_KINDS = {EstimatorKind.AO, EstimatorKind.UPSA_AO, EstimatorKind.AVG_UPSA_AO}
AVG_KINDS = {EstimatorKind.AVG_UPSA, EstimatorKind.AVG_UPSA_AO}


@dataclass(frozen=True, eq=False)
class EstimatorSpec:
    """One estimator to run: a kind plus its grid / oracle parameters."""

    kind: EstimatorKind
    grid: PenaltyGrid | None = None
    half_life: float = 24.0
    renormalize_ao_diag: bool = True

    def __post_init__(self):
        if self.kind in RIDGE_KINDS and self.grid is None:
            raise ConfigError(f"{self.kind.value} requires a penalty grid")
        if self.kind not in RIDGE_KINDS and self.grid is not None:
            raise ConfigError(f"{self.kind.value} does not take a penalty grid")
        if self.half_life <= 0:
            raise ConfigError(f"half_life must be > 0, got {self.half_life}")

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True, eq=False)
class BacktestConfig:
    t_is: int
    estimators: list[EstimatorSpec]
    t_oos: int = 6
    step: int = 1
    eval_start: pd.Period | None = None
    eval_end: pd.Period | None = None
    seed: int = 0
    target_vol: float = 0.10

    def __post_init__(self):
        if self.t_is < 3:
            raise ConfigError(f"t_is must be >= 3, got {self.t_is}")
        if self.t_oos < 2:
            raise ConfigError(f"t_oos must be >= 2, got {self.t_oos}")
        if self.step < 1:
            raise ConfigError(f"step must be >= 1, got {self.step}")
        if not self.estimators:
            raise ConfigError("no estimators configured")
        names = [s.name for s in self.estimators]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate estimator kinds: {names}")
        for bound in (self.eval_start, self.eval_end):
            if bound is not None and not isinstance(bound, pd.Period):
                raise ConfigError("eval bounds must be pandas monthly Periods or None")
        if self.eval_start is not None and self.eval_end is not None:
            if self.eval_end < self.eval_start:
                raise ConfigError("eval_end before eval_start")


@dataclass(eq=False)
class EstimatorSeries:
    """Dated walk-forward output of a single estimator."""

    name: str
    dates: pd.PeriodIndex
    sharpes: np.ndarray
    returns_1m: np.ndarray
    portfolios: list[Portfolio]
    ridge_weights: np.ndarray | None
    metrics: PortfolioMetrics

    def ridge_weight_turnover(self) -> np.ndarray:
        """L1 change of the mixture weights between consecutive rebalances."""
        if self.ridge_weights is None:
            raise ConfigError(f"{self.name} has no ridge weights")
        return np.abs(np.diff(self.ridge_weights, axis=0)).sum(axis=1)


@dataclass(eq=False)
class BacktestResult:
    dates: pd.PeriodIndex
    series: dict[str, EstimatorSeries]
    config: BacktestConfig

    def sharpe_frame(self) -> pd.DataFrame:
        rows = [
            {"date": str(d), "estimator": s.name, "oos_sharpe": v}
            for s in self.series.values()
            for d, v in zip(s.dates, s.sharpes)
        ]
        return pd.DataFrame(rows, columns=["date", "estimator", "oos_sharpe"])

    def summary_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.series.values():
            m = s.metrics
            rows.append(
                {
                    "estimator": s.name,
                    "sharpe": m.sharpe_annualized,
                    "diversification": m.diversification,
                    "turnover": m.turnover,
                    "gross_leverage": m.gross_leverage,
                    "max_drawdown": m.max_drawdown,
                }
            )
        return pd.DataFrame(rows)

    def weights_frame(self, name: str) -> pd.DataFrame:
        s = self.series[name]
        if s.ridge_weights is None:
            raise ConfigError(f"{name} has no ridge weights")
        cols = [f"alpha_{i + 1}" for i in range(s.ridge_weights.shape[1])]
        frame = pd.DataFrame(s.ridge_weights, columns=cols)
        frame.insert(0, "date", [str(d) for d in s.dates])
        return frame

    def cumulative_frame(self) -> pd.DataFrame:
        """Volatility-scaled cumulative log-returns, dated by accrual month."""
        rows = []
        for s in self.series.values():
            cum = scaled_cumulative_log_returns(s.returns_1m, self.config.target_vol)
            for d, v in zip(s.dates, cum):
                rows.append({"date": str(d + 1), "estimator": s.name, "cum_log_return": v})
        return pd.DataFrame(rows, columns=["date", "estimator", "cum_log_return"])


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass(eq=False)
class _DateIngredients:
    moments: object
    eig_plain: EigenSystem | None = None
    ao_cov: dict = field(default_factory=dict)  # pre_key -> filtered covariance
    ao_eig: dict = field(default_factory=dict)  # pre_key -> its eigensystem
    alphas: dict = field(default_factory=dict)  # (grid_key, pre_key|None) -> RidgeWeights


def _grid_key(grid: PenaltyGrid) -> tuple:
    return tuple(grid.z.tolist())


def _pre_key(spec: EstimatorSpec) -> tuple:
    return (spec.half_life, spec.renormalize_ao_diag)


def _build_records(panel, splits, t_is, t_oos, last_needed, workers) -> list[OracleRecord]:
    starts = []
    for start in range(0, panel.n_months - t_is - t_oos + 1):
        if panel.dates[start + t_is + t_oos - 1] > last_needed:
            break
        starts.append(start)
    return _parallel_map(lambda s: _oracle_record(panel, s, t_is, t_oos), starts, workers)


def run_backtest(panel: ReturnsPanel, config: BacktestConfig, workers: int = 1) -> BacktestResult:
    """Run every configured estimator over the shared walk-forward schedule.

    All estimators are evaluated on an identical rebalance-date set: dates
    outside [eval_start, eval_end] are skipped, and when any estimator needs
    oracle averages the schedule is additionally trimmed to dates whose
    strict past holds at least one completed oracle window, so cross-
    estimator comparisons stay paired.
    """
    specs = config.estimators
    kinds = {s.kind for s in specs}
    splits = walk_forward_splits(panel, config.t_is, config.t_oos, config.step)
    eval_splits = [
        sp
        for sp in splits
        if (config.eval_start is None or sp.rebalance_date >= config.eval_start)
        and (config.eval_end is None or sp.rebalance_date <= config.eval_end)
    ]
    if not eval_splits:
        raise ConfigError("no rebalance dates inside the evaluation window")

    need_ao = bool(kinds & AO_KINDS)
    records: list[OracleRecord] = []
    if need_ao:
        records = _build_records(
            panel, splits, config.t_is, config.t_oos, eval_splits[-1].rebalance_date, workers
        )
        first_usable = records[0].date if records else None
        eval_splits = [
            sp for sp in eval_splits if first_usable is not None and sp.rebalance_date >= first_usable
        ]
        if not eval_splits:
            raise ConfigError("no rebalance dates remain after oracle burn-in trimming")

    # Per-date oracle averages, one per distinct (half_life, renormalize) pair.
    ao_specs = sorted({_pre_key(s) for s in specs if s.kind in AO_KINDS})
    lam_ao: dict[tuple, list[np.ndarray]] = {k: [] for k in ao_specs}
    if need_ao:
        for half_life, renorm in ao_specs:
            history = OracleHistory(half_life=half_life)
            cursor = 0
            for sp in eval_splits:
                while cursor < len(records) and records[cursor].date <= sp.rebalance_date:
                    history.append(records[cursor])
                    cursor += 1
                lam_ao[(half_life, renorm)].append(
                    ao_eigenvalues(history, sp.rebalance_date + 1)
                )

    ridge_tasks = sorted(
        {
            (_grid_key(s.grid), _pre_key(s) if s.kind in AO_KINDS else None)
            for s in specs
            if s.kind in RIDGE_KINDS
        },
        key=lambda task: (task[0], task[1] is not None, task[1] or ()),
    )
    grids = {_grid_key(s.grid): s.grid for s in specs if s.grid is not None}
    need_plain_eig = bool(kinds & {EstimatorKind.UPSA, EstimatorKind.AVG_UPSA})
    ao_pre_keys = sorted({_pre_key(s) for s in specs if s.kind in AO_KINDS})

    def ingredients(args) -> _DateIngredients:
        pos, sp = args
        x_cal = slice_rows(panel, sp.cal_range)
        mom = sample_moments(x_cal)
        ing = _DateIngredients(moments=mom)
        if need_plain_eig:
            ing.eig_plain = eig_sym(mom.cov)
        if need_ao:
            corr, vols = cov_to_corr(mom.cov)
            for key in ao_pre_keys:
                pre = AoPrefilter(lam=lam_ao[key][pos], renormalize=key[1])
                cov_f = corr_to_cov(pre.filter_correlation(corr), vols)
                ing.ao_cov[key] = cov_f
                ing.ao_eig[key] = eig_sym(cov_f)
        for gkey, pkey in ridge_tasks:
            pre = None
            if pkey is not None:
                pre = AoPrefilter(lam=lam_ao[pkey][pos], renormalize=pkey[1])
            moments = loo_basis_returns(x_cal, grids[gkey], pre)
            ing.alphas[(gkey, pkey)] = solve_simplex_qp(moments)
        return ing

    per_date = _parallel_map(ingredients, list(enumerate(eval_splits)), workers)

    # Sequential assembly: weight histories, portfolios, realized statistics.
    histories = {s.name: WeightHistory() for s in specs if s.kind in AVG_KINDS}
    dates = pd.PeriodIndex([sp.rebalance_date for sp in eval_splits], freq="M")
    collected = {
        s.name: {"sharpe": [], "ret1": [], "ports": [], "ridge": []} for s in specs
    }
    for pos, (sp, ing) in enumerate(zip(eval_splits, per_date)):
        x_oos = slice_rows(panel, sp.test_range)
        for spec in specs:
            try:
                alpha = None
                if spec.kind in RIDGE_KINDS:
                    base_key = (
                        _grid_key(spec.grid),
                        _pre_key(spec) if spec.kind in AO_KINDS else None,
                    )
                    alpha = ing.alphas[base_key]
                if spec.kind is EstimatorKind.SAMPLE_COV:
                    cov = ing.moments.cov
                elif spec.kind is EstimatorKind.AO:
                    cov = ing.ao_cov[_pre_key(spec)]
                elif spec.kind in (EstimatorKind.UPSA, EstimatorKind.UPSA_AO):
                    eig = ing.eig_plain if spec.kind is EstimatorKind.UPSA else ing.ao_eig[_pre_key(spec)]
                    cov = mixture_covariance(eig, spec.grid, alpha)
                else:  # expanding average of the per-date mixture weights
                    histories[spec.name].append(sp.rebalance_date, alpha)
                    alpha = average_weights(histories[spec.name], sp.rebalance_date)
                    eig = ing.eig_plain if spec.kind is EstimatorKind.AVG_UPSA else ing.ao_eig[_pre_key(spec)]
                    cov = mixture_covariance(eig, spec.grid, alpha)
                port = max_sharpe_portfolio(cov, ing.moments.mean, asof=sp.rebalance_date)
                sharpe = oos_sharpe(port, x_oos)
            except ToolkitError as exc:
                raise EstimatorFailureError(
                    f"{spec.name} failed at {sp.rebalance_date}: {exc}"
                ) from exc
            bucket = collected[spec.name]
            bucket["ports"].append(port)
            bucket["sharpe"].append(sharpe)
            bucket["ret1"].append(float(x_oos[0] @ port.weights))
            if alpha is not None:
                bucket["ridge"].append(alpha.alpha)

    series = {}
    for spec in specs:
        bucket = collected[spec.name]
        sharpes = np.array(bucket["sharpe"])
        ret1 = np.array(bucket["ret1"])
        series[spec.name] = EstimatorSeries(
            name=spec.name,
            dates=dates,
            sharpes=sharpes,
            returns_1m=ret1,
            portfolios=bucket["ports"],
            ridge_weights=np.array(bucket["ridge"]) if bucket["ridge"] else None,
            metrics=summarize_portfolio_series(
                bucket["ports"], sharpes, ret1, config.target_vol
            ),
        )
    return BacktestResult(dates=dates, series=series, config=config)


def _with_grids(config: BacktestConfig, make_grid) -> BacktestConfig:
    specs = []
    for s in config.estimators:
        if s.kind in RIDGE_KINDS:
            specs.append(
                EstimatorSpec(
                    kind=s.kind,
                    grid=make_grid(s.grid),
                    half_life=s.half_life,
                    renormalize_ao_diag=s.renormalize_ao_diag,
                )
            )
        else:
            specs.append(s)
    return BacktestConfig(
        t_is=config.t_is,
        estimators=specs,
        t_oos=config.t_oos,
        step=config.step,
        eval_start=config.eval_start,
        eval_end=config.eval_end,
        seed=config.seed,
        target_vol=config.target_vol,
    )


def sweep_grid_lower_bound(
    panel: ReturnsPanel, config: BacktestConfig, lo_values, workers: int = 1
) -> pd.DataFrame:
    """Mean annualized Sharpe per estimator for each penalty-grid lower bound.

    The upper bound and point count of each estimator's grid are kept fixed;
    grid-free estimators are rerun unchanged.
    """
    lo_values = list(lo_values)
    if not lo_values:
        raise ConfigError("empty list of lower bounds")
    rows = {}
    for lo in lo_values:
        cfg = _with_grids(config, lambda g: log_grid(lo, g.z[-1], len(g)))
        result = run_backtest(panel, cfg, workers=workers)
        rows[lo] = {name: s.metrics.sharpe_annualized for name, s in result.series.items()}
        logger.info("sweep grid-lo=%g done", lo)
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "grid_lo"
    return frame


def sweep_window_length(
    panel: ReturnsPanel, config: BacktestConfig, t_values, workers: int = 1
) -> pd.DataFrame:
    """Mean annualized Sharpe per estimator for each calibration length.

    Oracle histories are rebuilt for every window length, since the oracle
    sub-windows share the calibration length.
    """
    t_values = list(t_values)
    if not t_values:
        raise ConfigError("empty list of window lengths")
    rows = {}
    for t_is in t_values:
        cfg = BacktestConfig(
            t_is=int(t_is),
            estimators=config.estimators,
            t_oos=config.t_oos,
            step=config.step,
            eval_start=config.eval_start,
            eval_end=config.eval_end,
            seed=config.seed,
            target_vol=config.target_vol,
        )
        result = run_backtest(panel, cfg, workers=workers)
        rows[int(t_is)] = {name: s.metrics.sharpe_annualized for name, s in result.series.items()}
        logger.info("sweep t_is=%d done", t_is)
    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "t_is"
    return frame


def _random_orthogonal(rng, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diagonal(r))


def _plane_rotation(u: np.ndarray, v: np.ndarray, angle: float) -> np.ndarray:
    n = u.size
    rot = np.eye(n)
    rot += (math.cos(angle) - 1.0) * (np.outer(u, u) + np.outer(v, v))
    rot += math.sin(angle) * (np.outer(u, v) - np.outer(v, u))
    return rot


def generate_synthetic_panel(
    n: int, t_total: int, drift: float = 0.0, seed: int = 0, start: str = "1970-01"
) -> ReturnsPanel:
    """Gaussian monthly panel with an optionally drifting population covariance.

    The population covariance starts from a power-law spectrum in a random
    orthogonal basis (average monthly variance 0.0025, i.e. ~5% monthly vol)
    and, when drift > 0, is rotated each month in a fresh random plane by
    `drift` radians with +/-5% multiplicative eigenvalue jitter. Means are
    fixed small positives. The innovation stream is drawn before the drift
    stream, so panels with different drift share the same shocks.
    """
    if n < 2:
        raise ConfigError(f"need at least 2 assets, got {n}")
    if t_total < 24:
        raise ConfigError(f"need at least 24 months, got {t_total}")
    if drift < 0:
        raise ConfigError(f"drift must be >= 0, got {drift}")
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.002, 0.008, size=n)
    lam = np.arange(1, n + 1, dtype=float) ** -1.2
    lam *= 0.0025 / lam.mean()
    basis = _random_orthogonal(rng, n)
    shocks = rng.standard_normal((t_total, n))

    cov = (basis * lam) @ basis.T
    returns = np.empty((t_total, n))
    chol = np.linalg.cholesky(cov)
    for t in range(t_total):
        returns[t] = mu + chol @ shocks[t]
        if drift > 0.0:
            w, v = np.linalg.eigh(cov)
            w = np.maximum(w, 1e-10 * w.max()) * (1.0 + rng.uniform(-0.05, 0.05, size=n))
            plane = np.linalg.qr(rng.standard_normal((n, 2)))[0]
            rot = _plane_rotation(plane[:, 0], plane[:, 1], drift)
            v = rot @ v
            cov = (v * w) @ v.T
            cov = (cov + cov.T) / 2.0
            chol = np.linalg.cholesky(cov)
    dates = pd.period_range(start, periods=t_total, freq="M")
    ids = [f"a{i:03d}" for i in range(n)]
    return ReturnsPanel(dates=dates, asset_ids=ids, returns=returns)
