import math

import numpy as np
import pandas as pd
import pytest

from covshrink.errors import (
    ConfigError,
    DegenerateVarianceError,
    NotPositiveDefiniteError,
    ZeroMeanError,
)
from covshrink.portfolio import (
    Portfolio,
    max_drawdown,
    max_sharpe_portfolio,
    oos_sharpe,
    scaled_cumulative_log_returns,
    summarize_portfolio_series,
    turnover,
)

from conftest import random_psd


class TestMaxSharpePortfolio:
    def test_identity_covariance(self):
        p = max_sharpe_portfolio(np.eye(2), np.array([1.0, 0.0]))
        assert np.allclose(p.weights, [1.0, 0.0])

    def test_diagonal_hand_case(self):
        p = max_sharpe_portfolio(np.diag([1.0, 4.0]), np.array([1.0, 1.0]))
        assert np.allclose(p.weights, [0.8, 0.2])
        assert np.allclose(p.budget_weights, [0.8, 0.2])

    def test_zero_mean_errors(self):
        with pytest.raises(ZeroMeanError):
            max_sharpe_portfolio(np.eye(3), np.zeros(3))

    def test_indefinite_matrix_errors(self):
        with pytest.raises(NotPositiveDefiniteError):
            max_sharpe_portfolio(np.diag([1.0, -1.0]), np.array([1.0, 1.0]))

    def test_gross_normalization(self, rng):
        cov = random_psd(rng, 6) + 0.1 * np.eye(6)
        mu = rng.normal(size=6)
        p = max_sharpe_portfolio(cov, mu)
        assert np.abs(p.weights).sum() == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance_of_direction(self, rng):
        cov = random_psd(rng, 5) + 0.1 * np.eye(5)
        mu = rng.normal(size=5)
        p1 = max_sharpe_portfolio(cov, mu)
        p2 = max_sharpe_portfolio(7.5 * cov, mu)
        assert np.max(np.abs(p1.weights - p2.weights)) <= 1e-10

    def test_residual_of_raw_solution(self, rng):
        # the normalized solve direction must still satisfy cov @ w ∝ mu
        cov = random_psd(rng, 8) + 0.05 * np.eye(8)
        mu = rng.normal(size=8)
        p = max_sharpe_portfolio(cov, mu)
        lhs = cov @ p.weights
        scale = (lhs @ mu) / (mu @ mu)
        assert np.linalg.norm(lhs - scale * mu) <= 1e-8 * np.linalg.norm(lhs)

    def test_positive_is_mean(self, rng):
        # direction preserved: in-sample expected return is positive
        cov = random_psd(rng, 5) + 0.1 * np.eye(5)
        mu = rng.normal(size=5)
        p = max_sharpe_portfolio(cov, mu)
        assert p.weights @ mu > 0

    def test_budget_weights_none_when_net_short(self):
        p = max_sharpe_portfolio(np.eye(2), np.array([-1.0, 0.2]))
        assert p.budget_weights is None
        assert math.isnan(p.gross_leverage)


class TestOosSharpe:
    def test_symmetric_returns_zero_sharpe(self):
        x = np.array([[0.01], [-0.01], [0.01], [-0.01], [0.01], [-0.01]])
        p = Portfolio(weights=np.array([1.0]))
        assert oos_sharpe(p, x) == pytest.approx(0.0, abs=1e-12)

    def test_constant_returns_error(self):
        x = np.full((6, 1), 0.02)
        with pytest.raises(DegenerateVarianceError):
            oos_sharpe(Portfolio(weights=np.array([1.0])), x)

    def test_hand_case_arithmetic(self):
        # returns 1%..6%: mean 3.5%, 1/dt std ~1.7078% -> ~7.0995 annualized
        x = np.array([[0.01], [0.02], [0.03], [0.04], [0.05], [0.06]])
        sr = oos_sharpe(Portfolio(weights=np.array([1.0])), x)
        monthly = 0.035 / math.sqrt(np.mean(np.square(np.arange(1, 7) / 100)) - 0.035**2)
        assert sr == pytest.approx(math.sqrt(12) * monthly, rel=1e-12)
        assert sr == pytest.approx(7.0993, abs=5e-4)

    def test_scale_invariance(self, rng):
        x = rng.normal(0.01, 0.05, size=(6, 4))
        w = rng.normal(size=4)
        p1 = Portfolio(weights=w / np.abs(w).sum())
        p2 = Portfolio(weights=w * 3.7)
        assert abs(oos_sharpe(p1, x) - oos_sharpe(p2, x)) <= 1e-10

    def test_needs_two_months(self):
        with pytest.raises(ConfigError):
            oos_sharpe(Portfolio(weights=np.array([1.0])), np.array([[0.01]]))


class TestTurnover:
    def test_identical(self):
        p = Portfolio(weights=np.array([0.5, 0.5]))
        assert turnover(p, p) == 0.0

    def test_full_rotation(self):
        a = Portfolio(weights=np.array([1.0, 0.0]))
        b = Portfolio(weights=np.array([0.0, 1.0]))
        assert turnover(a, b) == pytest.approx(2.0)

    def test_small_shift(self):
        a = Portfolio(weights=np.array([0.6, 0.4]))
        b = Portfolio(weights=np.array([0.5, 0.5]))
        assert turnover(a, b) == pytest.approx(0.2)


class TestScaledCumulativeLogReturns:
    def test_constant_vol_hits_target(self, rng):
        r = rng.normal(0.0, 0.04, size=5000)
        cum = scaled_cumulative_log_returns(r, target_vol=0.10)
        monthly = np.diff(np.concatenate([[0.0], cum]))
        realized = np.expm1(monthly).std(ddof=1) * math.sqrt(12)
        assert 0.075 <= realized <= 0.125

    def test_zero_series_errors(self):
        with pytest.raises(DegenerateVarianceError):
            scaled_cumulative_log_returns(np.zeros(12))

    def test_scale_invariant(self, rng):
        r = rng.normal(0.0, 0.03, size=60)
        a = scaled_cumulative_log_returns(r)
        b = scaled_cumulative_log_returns(4.2 * r)
        assert np.max(np.abs(a - b)) <= 1e-12

    def test_series_in_series_out(self, rng):
        idx = pd.period_range("2000-01", periods=24, freq="M")
        r = pd.Series(rng.normal(0.0, 0.03, size=24), index=idx)
        out = scaled_cumulative_log_returns(r)
        assert isinstance(out, pd.Series)
        assert (out.index == idx).all()

    def test_too_short(self):
        with pytest.raises(ConfigError):
            scaled_cumulative_log_returns(np.array([0.01] * 5))


class TestMaxDrawdown:
    def test_monotone_series(self):
        assert max_drawdown(np.array([0.0, 0.1, 0.2, 0.3])) == 0.0

    def test_hand_case(self):
        out = max_drawdown(np.array([0.0, 0.1, -0.1, 0.2]))
        assert out == pytest.approx(1.0 - math.exp(-0.2), rel=1e-12)

    def test_single_point(self):
        assert max_drawdown(np.array([0.3])) == 0.0


class TestSummarize:
    def test_basic_fields(self, rng):
        ports = []
        for _ in range(10):
            w = rng.normal(size=4)
            raw = w / np.abs(w).sum()
            budget = w / w.sum() if w.sum() > 0 else None
            ports.append(Portfolio(weights=raw, budget_weights=budget))
        sharpes = rng.normal(1.0, 0.3, size=10)
        rets = rng.normal(0.005, 0.02, size=10)
        m = summarize_portfolio_series(ports, sharpes, rets)
        assert m.sharpe_annualized == pytest.approx(sharpes.mean())
        assert 0 < m.diversification <= 4
        assert m.turnover >= 0
        assert not math.isnan(m.max_drawdown)

    def test_short_series_drawdown_nan(self, rng):
        ports = [Portfolio(weights=np.array([1.0]))] * 3
        m = summarize_portfolio_series(ports, np.ones(3), np.array([0.01, 0.02, 0.0]))
        assert math.isnan(m.max_drawdown)
        assert math.isnan(m.gross_leverage)
