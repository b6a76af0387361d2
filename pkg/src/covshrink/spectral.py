"""Sample moments, covariance/correlation conversion, and dense symmetric
eigendecomposition with a deterministic eigenvector sign convention."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NotPositiveDefiniteError, NumericError, ZeroVarianceError

# Gate for "symmetric within tolerance" (relative Frobenius).
_SYM_RTOL = 1e-8
# Round-off negatives this close to zero are clamped on PSD inputs.
_EIG_CLAMP = 1e-10


@dataclass(frozen=True, eq=False)
class SampleMoments:
    """First and second sample moments of a (time x assets) return window."""

    mean: np.ndarray
    cov: np.ndarray
    vols: np.ndarray
    dt: int


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigenvalues sorted descending with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def sample_moments(x: np.ndarray) -> SampleMoments:
    """Mean vector and 1/dt-normalized covariance of a dt x n return matrix.

    Uses the biased (1/dt) normalization, not 1/(dt-1).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ConfigError(f"expected a 2-D return matrix, got ndim={x.ndim}")
    dt, n = x.shape
    if dt < 2:
        raise NumericError(f"need at least 2 observations, got {dt}")
    if n < 1:
        raise ConfigError("return matrix has no columns")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / dt
    cov = (cov + cov.T) / 2.0
    vols = np.sqrt(np.clip(np.diagonal(cov), 0.0, None))
    return SampleMoments(mean=mean, cov=cov, vols=vols, dt=dt)


def cov_to_corr(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a covariance into (correlation, vols). Diagonal must be > 0."""
    cov = np.asarray(cov, dtype=float)
    d = np.diagonal(cov)
    bad = np.flatnonzero(d <= 0.0)
    if bad.size:
        raise ZeroVarianceError(asset=int(bad[0]))
    vols = np.sqrt(d)
    corr = cov / np.outer(vols, vols)
    np.fill_diagonal(corr, 1.0)
    return corr, vols


def corr_to_cov(corr: np.ndarray, vols: np.ndarray) -> np.ndarray:
    """Rescale a correlation matrix by per-asset volatilities."""
    corr = np.asarray(corr, dtype=float)
    vols = np.asarray(vols, dtype=float)
    if np.any(vols < 0):
        raise NumericError("negative volatility supplied to corr_to_cov")
    return corr * np.outer(vols, vols)


def _fix_signs(v: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive; ties resolved by
    # first occurrence, so decompositions are reproducible across runs.
    idx = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[idx, np.arange(v.shape[1])])
    signs[signs == 0] = 1.0
    return v * signs


def eig_sym(m: np.ndarray) -> EigenSystem:
    """Eigendecomposition of a symmetric PSD matrix, sorted descending.

    Round-off negatives within -1e-10 are clamped to zero; anything more
    negative raises, as all callers expect PSD inputs.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {m.shape}")
    norm = np.linalg.norm(m)
    asym = np.linalg.norm(m - m.T)
    if asym > _SYM_RTOL * max(norm, 1e-300):
        raise ConfigError(f"matrix not symmetric: asymmetry {asym:.3e} vs norm {norm:.3e}")
    lam, v = np.linalg.eigh(m)
    lam = lam[::-1].copy()
    v = np.ascontiguousarray(v[:, ::-1])
    small = (lam < 0.0) & (lam >= -_EIG_CLAMP)
    lam[small] = 0.0
    if np.any(lam < 0.0):
        raise NotPositiveDefiniteError(
            f"eigenvalue {lam.min():.3e} below -{_EIG_CLAMP:.0e}; input not PSD"
        )
    return EigenSystem(eigenvalues=lam, eigenvectors=_fix_signs(v))


def reconstruct(v: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Assemble V diag(lam) V^T. Expects orthonormal columns and lam >= 0."""
    v = np.asarray(v, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if v.ndim != 2 or lam.ndim != 1 or v.shape[1] != lam.shape[0]:
        raise ConfigError(f"shape mismatch: V {v.shape} vs lam {lam.shape}")
    if np.any(lam < -1e-12):
        raise NumericError(f"negative spectrum entry {lam.min():.3e} in reconstruct")
    out = (v * np.clip(lam, 0.0, None)) @ v.T
    return (out + out.T) / 2.0
