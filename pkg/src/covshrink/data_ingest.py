"""Loading, validation, and windowing of monthly return panels.

The on-disk format is a UTF-8 CSV with header ``date,<id1>,...,<idn>``,
dates as ``YYYY-MM``, and simple decimal returns (0.01 = 1%).
"""

import csv
import logging
import re
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, MissingValueError

logger = logging.getLogger(__name__)

_DATE_RE = re.compile(r"^\d{4}-\d{2}$")

MISSING_POLICIES = ("strict", "drop-incomplete")


@dataclass(frozen=True, eq=False)
class ReturnsPanel:
    """Dated monthly return matrix; immutable after construction.

    dates are consecutive calendar months, returns are simple monthly
    returns with no missing values and every entry > -1.
    """

    dates: pd.PeriodIndex
    asset_ids: list[str]
    returns: np.ndarray

    def __post_init__(self):
        dates = pd.PeriodIndex(self.dates, freq="M")
        returns = np.asarray(self.returns, dtype=float)
        if returns.ndim != 2:
            raise DataError("returns must be a 2-D matrix")
        t, n = returns.shape
        if t != len(dates):
            raise DataError(f"{len(dates)} dates but {t} return rows")
        if n != len(self.asset_ids):
            raise DataError(f"{len(self.asset_ids)} asset ids but {n} return columns")
        if len(set(self.asset_ids)) != n:
            raise DataError("duplicate asset ids")
        if t == 0 or n == 0:
            raise DataError("empty panel")
        steps = np.diff(dates.asi8)
        if np.any(steps <= 0):
            raise DataError("dates not strictly increasing")
        if np.any(steps != 1):
            gap = dates[int(np.argmax(steps != 1))]
            raise DataError(f"calendar gap after {gap}")
        if not np.all(np.isfinite(returns)):
            raise DataError("returns contain missing or non-finite values")
        if np.any(returns <= -1.0):
            r, c = np.argwhere(returns <= -1.0)[0]
            raise DataError(f"return <= -100% for {self.asset_ids[c]} at {dates[r]}")
        returns = returns.copy()
        returns.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "returns", returns)

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]

    @property
    def n_months(self) -> int:
        return self.returns.shape[0]

    def row_of(self, date) -> int:
        """Index of a month in the panel."""
        date = pd.Period(date, freq="M")
        loc = self.dates.get_loc(date) if date in self.dates else None
        if loc is None:
            raise DataError(f"{date} not in panel range {self.dates[0]}..{self.dates[-1]}")
        return int(loc)


@dataclass(frozen=True)
class WindowSplit:
    """One calibration/test pair of contiguous row ranges."""

    cal_range: range
    test_range: range
    rebalance_date: pd.Period = field(compare=False)

    def __post_init__(self):
        if self.cal_range.stop != self.test_range.start:
            raise ConfigError("test range must start where calibration ends")
        if len(self.cal_range) < 2 or len(self.test_range) < 1:
            raise ConfigError("degenerate split ranges")


def load_returns_csv(path, policy: str = "strict") -> ReturnsPanel:
    """Load and validate a monthly return panel from CSV.

    policy="strict" raises on any missing cell; policy="drop-incomplete"
    removes (and logs) columns that have any missing value.
    """
    if policy not in MISSING_POLICIES:
        raise ConfigError(f"unknown missing-data policy {policy!r}; use one of {MISSING_POLICIES}")
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(csv.reader(fh), None)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not header or header[0] != "date" or len(header) < 2:
        raise DataError(f"{path}: header must be 'date,<id1>,...', got {header!r}")
    ids = [h.strip() for h in header[1:]]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise DataError(f"{path}: duplicate asset ids {dupes}")

    raw = pd.read_csv(path, dtype={"date": str}, float_precision="round_trip")
    date_strs = raw["date"].astype(str).str.strip()
    bad = date_strs[~date_strs.map(lambda s: bool(_DATE_RE.match(s)))]
    if len(bad):
        raise DataError(f"{path}: unparseable date {bad.iloc[0]!r} (expected YYYY-MM)")
    try:
        dates = pd.PeriodIndex(date_strs, freq="M")
    except Exception as exc:
        raise DataError(f"{path}: invalid year-month value ({exc})") from exc
    if len(dates) and np.any(np.diff(dates.asi8) <= 0):
        raise DataError(f"{path}: dates not strictly increasing")

    try:
        values = raw[header[1:]].apply(pd.to_numeric, errors="raise").to_numpy(dtype=float)
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: non-numeric return value ({exc})") from exc

    missing = ~np.isfinite(values)
    if missing.any():
        if policy == "strict":
            r, c = np.argwhere(missing)[0]
            raise MissingValueError(row=str(dates[r]), col=ids[c])
        keep = ~missing.any(axis=0)
        dropped = [i for i, k in zip(ids, keep) if not k]
        logger.warning("dropping %d incomplete columns: %s", len(dropped), ", ".join(dropped))
        ids = [i for i, k in zip(ids, keep) if k]
        values = values[:, keep]
    if values.shape[1] == 0 or values.shape[0] == 0:
        raise DataError(f"{path}: empty panel after cleaning")
    return ReturnsPanel(dates=dates, asset_ids=ids, returns=values)


def panel_to_csv(panel: ReturnsPanel, path) -> None:
    """Write a panel in the same CSV schema load_returns_csv reads."""
    frame = pd.DataFrame(panel.returns, columns=panel.asset_ids)
    frame.insert(0, "date", panel.dates.astype(str))
    frame.to_csv(path, index=False)


def walk_forward_splits(panel: ReturnsPanel, t_is: int, t_oos: int, step: int = 1) -> list[WindowSplit]:
    """Maximal list of calibration/test splits advancing by `step` months."""
    if t_is < 2 or t_oos < 1 or step < 1:
        raise ConfigError(f"need t_is >= 2, t_oos >= 1, step >= 1; got ({t_is}, {t_oos}, {step})")
    total = panel.n_months
    if t_is + t_oos > total:
        raise ConfigError(f"panel too short: {total} months < t_is + t_oos = {t_is + t_oos}")
    splits = []
    for start in range(0, total - t_is - t_oos + 1, step):
        splits.append(
            WindowSplit(
                cal_range=range(start, start + t_is),
                test_range=range(start + t_is, start + t_is + t_oos),
                rebalance_date=panel.dates[start + t_is - 1],
            )
        )
    return splits


def slice_rows(panel: ReturnsPanel, rows: range) -> np.ndarray:
    """Contiguous copy of the given row range of the return matrix."""
    if rows.step != 1:
        raise ConfigError("only unit-step ranges are supported")
    if len(rows) == 0:
        raise ConfigError("empty row range")
    if rows.start < 0 or rows.stop > panel.n_months:
        raise ConfigError(f"row range {rows} out of bounds for {panel.n_months} months")
    return panel.returns[rows.start : rows.stop].copy()
