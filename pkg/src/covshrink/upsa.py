"""Leave-one-out basis returns, the simplex QP for ridge-mixture weights,
covariance assembly from the mixed spectrum, and expanding-window weight
averaging.

The mixture f(lam) = sum_i alpha_i / (z_i + lam) is a precision-scale
spectrum: each term is the spectrum of a ridge precision (Sigma + z I)^-1
in the sample eigenbasis. The filtered covariance is therefore
V diag(1/f(lam)) V' and the filtered precision V diag(f(lam)) V'.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .average_oracle import AoPrefilter
from .errors import ConfigError, NoHistoryError, NumericError, ZeroMeanError, ZeroVarianceError
from .ridge import PenaltyGrid, RidgeWeights, shrink_eigenvalues
from .spectral import EigenSystem, eig_sym, reconstruct, sample_moments

logger = logging.getLogger(__name__)

# Relative diagonal regularization applied to S before the QP solve.
_S_REG = 1e-12
_QP_FEAS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class BasisReturnMoments:
    """Held-out mean vector and covariance of the per-ridge basis returns."""

    m: np.ndarray
    s: np.ndarray
    folds: int


@dataclass
class WeightHistory:
    """Dated mixture-weight vectors, strictly increasing in time."""

    entries: list[tuple[pd.Period, RidgeWeights]] = field(default_factory=list)

    def append(self, date, weights: RidgeWeights) -> None:
        date = pd.Period(date, freq="M")
        if self.entries and date <= self.entries[-1][0]:
            raise ConfigError(f"weight entry {date} not after {self.entries[-1][0]}")
        self.entries.append((date, weights))

    def __len__(self) -> int:
        return len(self.entries)


def _batched_eigh_desc(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Column signs are irrelevant downstream (quadratic forms only).
    lam, v = np.linalg.eigh(mats)
    return lam[..., ::-1].copy(), np.ascontiguousarray(v[..., :, ::-1])


def _loo_fold_covs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-fold (mean, covariance) with row t removed, 1/(T-1) normalization."""
    t, _ = x.shape
    total = x.sum(axis=0)
    gram = x.T @ x
    means = (total[None, :] - x) / (t - 1)
    covs = (gram[None, :, :] - x[:, :, None] * x[:, None, :]) / (t - 1)
    covs -= means[:, :, None] * means[:, None, :]
    return means, covs


def _apply_prefilter_batch(covs: np.ndarray, prefilter: AoPrefilter) -> np.ndarray:
    d = np.diagonal(covs, axis1=1, axis2=2)
    if np.any(d <= 0.0):
        fold, asset = np.argwhere(d <= 0.0)[0]
        raise ZeroVarianceError(asset=int(asset), message=f"zero variance in fold {fold}")
    vols = np.sqrt(d)
    corr = covs / (vols[:, :, None] * vols[:, None, :])
    idx = np.arange(corr.shape[1])
    corr[:, idx, idx] = 1.0
    _, v = _batched_eigh_desc(corr)
    filt = np.einsum("tik,k,tjk->tij", v, np.clip(prefilter.lam, 0.0, None), v, optimize=True)
    if prefilter.renormalize:
        fd = filt[:, idx, idx]
        if np.any(fd <= 0.0):
            raise NumericError("non-positive diagonal after spectrum replacement in a fold")
        scale = np.sqrt(fd)
        filt /= scale[:, :, None] * scale[:, None, :]
        filt[:, idx, idx] = 1.0
    return filt * (vols[:, :, None] * vols[:, None, :])


def loo_basis_returns(
    x_cal: np.ndarray, grid: PenaltyGrid, prefilter: AoPrefilter | None = None
) -> BasisReturnMoments:
    """Held-out moments of unit-gross ridge portfolios, one fold per month.

    For each fold the moments are re-estimated without the held-out row
    (optionally with the correlation spectrum replaced through `prefilter`),
    one max-Sharpe portfolio is built per ridge level from the filtered
    precision and the fold means, and its return on the held-out row is
    recorded. m and s are the across-fold mean and (1/folds) covariance of
    those basis returns.
    """
    x = np.asarray(x_cal, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise ConfigError("leave-one-out needs a 2-D window with at least 3 rows")
    t, _ = x.shape
    means, covs = _loo_fold_covs(x)
    if prefilter is not None:
        covs = _apply_prefilter_batch(covs, prefilter)
    lam, v = _batched_eigh_desc(covs)
    lam = np.clip(lam, 0.0, None)
    proj = np.einsum("tnk,tn->tk", v, means, optimize=True)
    coef = proj[:, :, None] / (lam[:, :, None] + grid.z[None, None, :])
    ports = np.einsum("tnk,tkl->tnl", v, coef, optimize=True)
    gross = np.abs(ports).sum(axis=1, keepdims=True)
    if np.any(gross <= 0.0):
        raise ZeroMeanError("a fold produced an all-zero basis portfolio (zero fold mean)")
    ports /= gross
    basis = np.einsum("tn,tnl->tl", x, ports, optimize=True)
    m = basis.mean(axis=0)
    centered = basis - m
    s = centered.T @ centered / t
    return BasisReturnMoments(m=m, s=(s + s.T) / 2.0, folds=t)


def _solve_kkt(s_aa: np.ndarray, m_a: np.ndarray) -> tuple[np.ndarray, float]:
    k = m_a.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = s_aa
    kkt[:k, k] = -1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([m_a, [1.0]])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k], float(sol[k])


def solve_simplex_qp(moments: BasisReturnMoments) -> RidgeWeights:
    """argmax of a'm - 0.5 a'Sa over the probability simplex.

    Exact primal active-set method: at the optimum the gradient m - Sa is
    constant on the support and no smaller anywhere else. Deterministic for
    a fixed input; ties on degenerate faces resolve to the minimum-norm
    solution of the KKT system.
    """
    m = np.asarray(moments.m, dtype=float)
    s = np.asarray(moments.s, dtype=float)
    if m.ndim != 1 or s.shape != (m.size, m.size):
        raise ConfigError(f"moment shapes disagree: m {m.shape}, S {s.shape}")
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
        raise NumericError("non-finite basis-return moments")
    ell = m.size
    if ell == 1:
        return RidgeWeights(alpha=np.array([1.0]))
    s = (s + s.T) / 2.0
    s = s + np.eye(ell) * (_S_REG * np.trace(s) / ell)

    if np.max(np.abs(s)) == 0.0:
        best = m == m.max()
        alpha = best / best.sum()
        return RidgeWeights(alpha=alpha)

    scale = max(np.max(np.abs(m)), np.max(np.abs(s)), 1e-30)
    grad_tol = 1e-11 * scale
    alpha = np.zeros(ell)
    alpha[int(np.argmax(m - 0.5 * np.diagonal(s)))] = 1.0
    active = alpha > 0.0
    for _ in range(50 + 10 * ell):
        idx = np.flatnonzero(active)
        cand = np.zeros(ell)
        cand[idx], _ = _solve_kkt(s[np.ix_(idx, idx)], m[idx])
        if cand[idx].min() >= -_QP_FEAS_TOL:
            alpha = np.clip(cand, 0.0, None)
            grad = m - s @ alpha
            level = grad[idx].mean()
            outside = ~active
            if not outside.any() or grad[outside].max() <= level + grad_tol:
                alpha /= alpha.sum()
                return RidgeWeights(alpha=alpha)
            active[int(np.flatnonzero(outside)[np.argmax(grad[outside])])] = True
        else:
            step = cand - alpha
            shrinking = idx[step[idx] < 0.0]
            ratios = alpha[shrinking] / -step[shrinking]
            theta = ratios.min()
            blocked = shrinking[int(np.argmin(ratios))]
            alpha = np.clip(alpha + theta * step, 0.0, None)
            alpha[blocked] = 0.0
            active[blocked] = False
    raise NumericError("simplex QP active-set iteration did not converge")


def mixture_covariance(eig: EigenSystem, grid: PenaltyGrid, weights: RidgeWeights) -> np.ndarray:
    """Filtered covariance V diag(1/f(lam)) V' from the mixed precision spectrum."""
    f = shrink_eigenvalues(eig.eigenvalues, grid, weights)
    return reconstruct(eig.eigenvectors, 1.0 / f)


def upsa_covariance(
    x_cal: np.ndarray, grid: PenaltyGrid, prefilter: AoPrefilter | None = None
) -> tuple[np.ndarray, RidgeWeights]:
    """Filtered covariance and fitted mixture weights for one window.

    Runs the leave-one-out construction, solves the simplex QP, and mixes
    the window's (optionally prefiltered) spectrum. The result is symmetric
    positive definite by construction.
    """
    moments = sample_moments(x_cal)
    base = moments.cov if prefilter is None else prefilter.filter_covariance(moments.cov)
    weights = solve_simplex_qp(loo_basis_returns(x_cal, grid, prefilter))
    return mixture_covariance(eig_sym(base), grid, weights), weights


def average_weights(history: WeightHistory, upto) -> RidgeWeights:
    """Arithmetic mean of all recorded weight vectors dated <= upto."""
    upto = pd.Period(upto, freq="M")
    stack = [w.alpha for d, w in history.entries if d <= upto]
    if not stack:
        raise NoHistoryError(f"weight history is empty up to {upto}")
    return RidgeWeights(alpha=np.mean(stack, axis=0))
