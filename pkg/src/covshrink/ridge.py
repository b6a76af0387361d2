"""Penalty grids, the ridge-mixture eigenvalue shrinker, and the Herfindahl
concentration index of mixture weights."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_SIMPLEX_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PenaltyGrid:
    """Strictly increasing, strictly positive ridge penalties."""

    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.ndim != 1 or z.size < 1:
            raise ConfigError("penalty grid must be a non-empty 1-D vector")
        if np.any(z <= 0.0) or not np.all(np.isfinite(z)):
            raise ConfigError("penalty grid entries must be finite and > 0")
        if z.size > 1 and np.any(np.diff(z) <= 0.0):
            raise ConfigError("penalty grid must be strictly increasing")
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return self.z.size


@dataclass(frozen=True, eq=False)
class RidgeWeights:
    """Simplex weights over a penalty grid: alpha >= 0, sum(alpha) = 1."""

    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        if a.ndim != 1 or a.size < 1:
            raise ConfigError("weights must form a non-empty 1-D vector")
        if not np.all(np.isfinite(a)):
            raise ConfigError("weights contain non-finite entries")
        if np.any(a < -1e-10):
            raise ConfigError(f"negative weight {a.min():.3e}")
        a = np.clip(a, 0.0, None)
        if abs(a.sum() - 1.0) > _SIMPLEX_TOL:
            raise ConfigError(f"weights sum to {a.sum():.10f}, expected 1")
        object.__setattr__(self, "alpha", a)

    def __len__(self) -> int:
        return self.alpha.size


def log_grid(lo: float, hi: float, count: int) -> PenaltyGrid:
    """Geometric sequence of `count` penalties from lo to hi, inclusive.

    count=1 degenerates to the singleton {lo} so a one-point grid reduces
    the mixture to a plain ridge.
    """
    if count < 1:
        raise ConfigError(f"grid count must be >= 1, got {count}")
    if lo <= 0.0:
        raise ConfigError(f"grid lower bound must be > 0, got {lo}")
    if count == 1:
        return PenaltyGrid(z=np.array([lo]))
    if hi <= lo:
        raise ConfigError(f"need lo < hi for count >= 2, got [{lo}, {hi}]")
    return PenaltyGrid(z=np.geomspace(lo, hi, count))


def shrink_eigenvalues(lam: np.ndarray, grid: PenaltyGrid, weights: RidgeWeights) -> np.ndarray:
    """Weighted sum of ridge resolvents sum_i alpha_i / (z_i + lam).

    The output is a precision-scale spectrum: strictly positive and strictly
    decreasing in each eigenvalue.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if len(grid) != len(weights):
        raise ConfigError(f"grid has {len(grid)} points but weights have {len(weights)}")
    if np.any(lam < 0.0):
        raise ConfigError(f"negative eigenvalue {lam.min():.3e} passed to shrink_eigenvalues")
    return (weights.alpha[None, :] / (grid.z[None, :] + lam[:, None])).sum(axis=1)


def herfindahl(weights: RidgeWeights) -> float:
    """Inverse participation ratio 1 / sum(alpha^2): 1 = one-hot, l = uniform."""
    return float(1.0 / np.sum(weights.alpha**2))
