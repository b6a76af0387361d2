import numpy as np
import pandas as pd
import pytest

from covshrink.data_ingest import ReturnsPanel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_panel(returns, start="2000-01", ids=None) -> ReturnsPanel:
    returns = np.asarray(returns, dtype=float)
    t, n = returns.shape
    return ReturnsPanel(
        dates=pd.period_range(start, periods=t, freq="M"),
        asset_ids=ids or [f"a{i:03d}" for i in range(n)],
        returns=returns,
    )


def random_panel(rng, n=5, t=60, scale=0.03, start="2000-01") -> ReturnsPanel:
    return make_panel(rng.normal(0.004, scale, size=(t, n)), start=start)


def random_psd(rng, n, rank=None):
    rank = rank or n
    a = rng.normal(size=(n, rank))
    return a @ a.T / rank


def random_correlation(rng, n):
    cov = random_psd(rng, n) + 1e-6 * np.eye(n)
    d = np.sqrt(np.diagonal(cov))
    corr = cov / np.outer(d, d)
    np.fill_diagonal(corr, 1.0)
    return corr
