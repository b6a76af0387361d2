"""Oracle eigenvalues, their strict-past exponentially weighted rank-wise
average, and the resulting correlation-filtering operator.

An oracle vector is the diagonal of a test-window correlation matrix
expressed in the calibration eigenbasis: the best spectrum one could have
used in hindsight while keeping the calibration eigenvectors. Averaging
oracle vectors over many past calibration/test pairs gives a shrinkage
target that is immune to single-window noise and absorbs the typical
drift between calibration and test windows.
"""

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .data_ingest import ReturnsPanel, slice_rows, walk_forward_splits
from .errors import ConfigError, DataError, NoHistoryError, NumericError
from .spectral import corr_to_cov, cov_to_corr, eig_sym, reconstruct, sample_moments

_UNIT_DIAG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OracleRecord:
    """One dated oracle eigenvalue vector (date = end of its test window)."""

    date: pd.Period
    lam_oracle: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam_oracle, dtype=float)
        if lam.ndim != 1 or np.any(lam < 0.0):
            raise ConfigError("oracle eigenvalues must be a non-negative 1-D vector")
        object.__setattr__(self, "date", pd.Period(self.date, freq="M"))
        object.__setattr__(self, "lam_oracle", lam)


@dataclass
class OracleHistory:
    """Ordered, append-only collection of oracle records plus the EWMA half-life."""

    half_life: float
    records: list[OracleRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.half_life <= 0:
            raise ConfigError(f"half_life must be > 0, got {self.half_life}")
        dates = [r.date for r in self.records]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ConfigError("oracle record dates must be strictly increasing")

    def append(self, record: OracleRecord) -> None:
        if self.records and record.date <= self.records[-1].date:
            raise ConfigError(f"record {record.date} not after {self.records[-1].date}")
        if self.records and record.lam_oracle.shape != self.records[-1].lam_oracle.shape:
            raise ConfigError("oracle vector length changed mid-history")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)


def oracle_eigenvalues(c_cal: np.ndarray, c_test: np.ndarray) -> np.ndarray:
    """diag(V' C_test V) for the descending-order eigenvectors V of C_cal.

    Both inputs must be unit-diagonal (correlation) matrices, so the output
    sums to n exactly up to round-off.
    """
    c_cal = np.asarray(c_cal, dtype=float)
    c_test = np.asarray(c_test, dtype=float)
    if c_cal.shape != c_test.shape:
        raise ConfigError(f"shape mismatch {c_cal.shape} vs {c_test.shape}")
    for name, c in (("calibration", c_cal), ("test", c_test)):
        if np.max(np.abs(np.diagonal(c) - 1.0)) > _UNIT_DIAG_TOL:
            raise ConfigError(f"{name} matrix does not have a unit diagonal")
    v = eig_sym(c_cal).eigenvectors
    return np.einsum("ij,jk,ik->k", c_test, v, v, optimize=True)


def ao_eigenvalues(history: OracleHistory, asof) -> np.ndarray:
    """Rank-wise EWMA of all records strictly before `asof`.

    Weights are proportional to 2^(-age/half_life) with age in months from
    record date to asof, normalized to sum to one.
    """
    asof = pd.Period(asof, freq="M")
    past = [r for r in history.records if r.date < asof]
    if not past:
        raise NoHistoryError(f"no oracle records strictly before {asof}")
    ages = np.array([(asof - r.date).n for r in past], dtype=float)
    w = np.exp2(-ages / history.half_life)
    w /= w.sum()
    return w @ np.stack([r.lam_oracle for r in past])


def ao_filter(corr: np.ndarray, lam_ao: np.ndarray, renormalize: bool = True) -> np.ndarray:
    """Replace the spectrum of a correlation matrix with `lam_ao`.

    With renormalize=True the result is rescaled back to unit diagonal so
    it is again a correlation matrix (the substitution alone does not
    preserve the diagonal).
    """
    eig = eig_sym(np.asarray(corr, dtype=float))
    lam_ao = np.asarray(lam_ao, dtype=float)
    if lam_ao.shape != eig.eigenvalues.shape:
        raise ConfigError(f"expected {eig.n} spectrum entries, got {lam_ao.shape}")
    out = reconstruct(eig.eigenvectors, lam_ao)
    if renormalize:
        d = np.diagonal(out)
        if np.any(d <= 0.0):
            raise NumericError("non-positive diagonal after spectrum replacement")
        scale = np.sqrt(d)
        out = out / np.outer(scale, scale)
        np.fill_diagonal(out, 1.0)
    return out


@dataclass(frozen=True, eq=False)
class AoPrefilter:
    """A fixed rank-wise spectrum applied to every correlation matrix."""

    lam: np.ndarray
    renormalize: bool = True

    def filter_correlation(self, corr: np.ndarray) -> np.ndarray:
        return ao_filter(corr, self.lam, renormalize=self.renormalize)

    def filter_covariance(self, cov: np.ndarray) -> np.ndarray:
        corr, vols = cov_to_corr(cov)
        return corr_to_cov(self.filter_correlation(corr), vols)


def _oracle_record(panel: ReturnsPanel, start: int, t_is: int, t_oos: int) -> OracleRecord:
    cal = slice_rows(panel, range(start, start + t_is))
    test = slice_rows(panel, range(start + t_is, start + t_is + t_oos))
    c_cal, _ = cov_to_corr(sample_moments(cal).cov)
    c_test, _ = cov_to_corr(sample_moments(test).cov)
    return OracleRecord(
        date=panel.dates[start + t_is + t_oos - 1],
        lam_oracle=np.clip(oracle_eigenvalues(c_cal, c_test), 0.0, None),
    )


def build_oracle_history(
    panel: ReturnsPanel, t_is: int, t_oos: int, asof, half_life: float
) -> OracleHistory:
    """All monthly-stepped oracle records whose test windows end before `asof`."""
    if t_oos < 2:
        raise ConfigError(f"oracle test windows need t_oos >= 2, got {t_oos}")
    asof = pd.Period(asof, freq="M")
    history = OracleHistory(half_life=half_life)
    for split in walk_forward_splits(panel, t_is, t_oos, step=1):
        end_date = panel.dates[split.test_range.stop - 1]
        if end_date >= asof:
            break
        history.append(_oracle_record(panel, split.cal_range.start, t_is, t_oos))
    if not history.records:
        raise NoHistoryError(f"panel supports no completed oracle windows before {asof}")
    return history


def history_to_csv(history: OracleHistory, path) -> None:
    """Persist records as a CSV with a date column plus one column per rank."""
    n = history.records[0].lam_oracle.size if history.records else 0
    frame = pd.DataFrame(
        [r.lam_oracle for r in history.records],
        columns=[f"lam_{k + 1}" for k in range(n)],
    )
    frame.insert(0, "date", [str(r.date) for r in history.records])
    frame.to_csv(path, index=False)


def history_from_csv(path, half_life: float) -> OracleHistory:
    frame = pd.read_csv(path, float_precision="round_trip")
    if "date" not in frame.columns:
        raise DataError(f"{path}: oracle history CSV needs a 'date' column")
    history = OracleHistory(half_life=half_life)
    values = frame.drop(columns="date").to_numpy(dtype=float)
    for date, lam in zip(frame["date"], values):
        history.append(OracleRecord(date=pd.Period(date, freq="M"), lam_oracle=lam))
    return history
