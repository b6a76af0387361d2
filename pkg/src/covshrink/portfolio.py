"""Max-Sharpe portfolio construction and per-portfolio performance metrics."""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import (
    ConfigError,
    DegenerateVarianceError,
    NotPositiveDefiniteError,
    ZeroMeanError,
)

ANNUALIZATION = math.sqrt(12.0)


@dataclass(frozen=True, eq=False)
class Portfolio:
    """Asset exposures normalized to unit gross (sum |w| = 1).

    budget_weights is the same direction rescaled to sum to one; it is None
    when the raw solution has non-positive net exposure.
    """

    weights: np.ndarray
    asof: object = None
    budget_weights: np.ndarray | None = None

    @property
    def diversification(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    @property
    def gross_leverage(self) -> float:
        """Gross exposure of the budget-normalized variant (NaN if undefined)."""
        if self.budget_weights is None:
            return float("nan")
        return float(np.abs(self.budget_weights).sum())


@dataclass(frozen=True)
class PortfolioMetrics:
    sharpe_annualized: float
    diversification: float
    turnover: float
    gross_leverage: float
    max_drawdown: float


def max_sharpe_portfolio(cov_filtered: np.ndarray, mu: np.ndarray, asof=None) -> Portfolio:
    """Direction of Sigma^-1 mu under gross-exposure normalization.

    The linear system is solved through a Cholesky factorization; the input
    must be positive definite.
    """
    cov = np.asarray(cov_filtered, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or mu.shape != (cov.shape[0],):
        raise ConfigError(f"shape mismatch: cov {cov.shape}, mu {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ConfigError("mean vector contains non-finite entries")
    if np.max(np.abs(mu)) == 0.0:
        raise ZeroMeanError("mean vector is identically zero")
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"filtered covariance not positive definite: {exc}") from exc
    raw = scipy.linalg.cho_solve(factor, mu, check_finite=False)
    gross = np.abs(raw).sum()
    net = raw.sum()
    budget = raw / net if net > 0.0 else None
    return Portfolio(weights=raw / gross, asof=asof, budget_weights=budget)


def oos_sharpe(p: Portfolio, x_oos: np.ndarray) -> float:
    """Annualized realized mean over realized vol of the holding-window returns.

    Realized moments use the same 1/dt normalization as calibration moments;
    monthly ratios are annualized by sqrt(12).
    """
    x = np.asarray(x_oos, dtype=float)
    if x.ndim != 2 or x.shape[1] != p.weights.shape[0]:
        raise ConfigError(f"holding window shape {x.shape} does not match portfolio")
    if x.shape[0] < 2:
        raise ConfigError("realized covariance needs at least 2 holding months")
    r = x @ p.weights
    mean = r.mean()
    var = np.mean(r**2) - mean**2
    if var <= 0.0:
        raise DegenerateVarianceError("holding-window returns have zero variance")
    return float(ANNUALIZATION * mean / math.sqrt(var))


def turnover(prev: Portfolio, nxt: Portfolio) -> float:
    """L1 distance between consecutive weight vectors."""
    if prev.weights.shape != nxt.weights.shape:
        raise ConfigError("portfolios have different sizes")
    return float(np.abs(nxt.weights - prev.weights).sum())


def _rolling_std(values: np.ndarray, before: int = 3, after: int = 2) -> np.ndarray:
    t = values.size
    out = np.empty(t)
    for i in range(t):
        window = values[max(0, i - before) : min(t, i + after + 1)]
        out[i] = window.std(ddof=1)
    return out


def scaled_cumulative_log_returns(series, target_vol: float = 0.10):
    """Cumulative log-returns after rescaling each month to a constant
    volatility target.

    Each monthly return is divided by a centered 6-month rolling standard
    deviation (3 prior months + current + 2 following, clipped at the series
    edges) and multiplied by target_vol / sqrt(12). Accepts a plain array or
    a pandas Series; the return type matches the input.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim != 1 or values.size < 6:
        raise ConfigError("need a 1-D series of at least 6 monthly returns")
    if target_vol <= 0.0:
        raise ConfigError(f"target_vol must be > 0, got {target_vol}")
    stds = _rolling_std(values)
    if np.any(stds <= 0.0):
        raise DegenerateVarianceError("rolling standard deviation hit zero")
    scaled = values / stds * (target_vol / ANNUALIZATION)
    out = np.cumsum(np.log1p(scaled))
    if isinstance(series, pd.Series):
        return pd.Series(out, index=series.index)
    return out


def max_drawdown(cum_log) -> float:
    """Deepest peak-to-trough decline of a cumulative log-return series,
    reported as a fraction 1 - exp(-depth)."""
    values = np.asarray(cum_log, dtype=float)
    if values.size == 0:
        return 0.0
    peaks = np.maximum.accumulate(values)
    depth = float(np.max(peaks - values))
    return 1.0 - math.exp(-depth)


def summarize_portfolio_series(
    portfolios: list[Portfolio],
    sharpes: np.ndarray,
    returns_1m: np.ndarray,
    target_vol: float = 0.10,
) -> PortfolioMetrics:
    """Average the per-rebalance statistics into one summary row.

    Drawdown is measured on the volatility-scaled cumulative log-return
    series; it is NaN when the series is too short to scale.
    """
    if not portfolios:
        raise ConfigError("no portfolios to summarize")
    sharpes = np.asarray(sharpes, dtype=float)
    turns = [turnover(a, b) for a, b in zip(portfolios, portfolios[1:])]
    levs = np.array([p.gross_leverage for p in portfolios])
    with np.errstate(invalid="ignore"):
        lev = float(np.nanmean(levs)) if np.any(np.isfinite(levs)) else float("nan")
    try:
        mdd = max_drawdown(scaled_cumulative_log_returns(returns_1m, target_vol))
    except (ConfigError, DegenerateVarianceError):
        mdd = float("nan")
    return PortfolioMetrics(
        sharpe_annualized=float(sharpes.mean()),
        diversification=float(np.mean([p.diversification for p in portfolios])),
        turnover=float(np.mean(turns)) if turns else float("nan"),
        gross_leverage=lev,
        max_drawdown=mdd,
    )
