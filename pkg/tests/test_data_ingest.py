import numpy as np
import pandas as pd
import pytest

from covshrink.data_ingest import (
    ReturnsPanel,
    load_returns_csv,
    panel_to_csv,
    slice_rows,
    walk_forward_splits,
)
from covshrink.errors import ConfigError, DataError, MissingValueError

from conftest import make_panel, random_panel


def write_csv(tmp_path, text, name="panel.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


WELL_FORMED = "date,x,y\n2001-01,0.01,0.02\n2001-02,-0.01,0.0\n2001-03,0.005,0.015\n"


class TestLoadReturnsCsv:
    def test_well_formed(self, tmp_path):
        panel = load_returns_csv(write_csv(tmp_path, WELL_FORMED))
        assert panel.n_months == 3 and panel.n_assets == 2
        assert panel.asset_ids == ["x", "y"]
        assert panel.returns[1, 0] == -0.01
        assert str(panel.dates[0]) == "2001-01"

    def test_missing_cell_strict(self, tmp_path):
        path = write_csv(tmp_path, "date,x,y\n2001-01,0.01,\n2001-02,0.0,0.0\n")
        with pytest.raises(MissingValueError) as err:
            load_returns_csv(path, policy="strict")
        assert err.value.col == "y"
        assert err.value.row == "2001-01"

    def test_missing_cell_dropped(self, tmp_path, caplog):
        path = write_csv(tmp_path, "date,x,y\n2001-01,0.01,\n2001-02,0.0,0.0\n")
        with caplog.at_level("WARNING"):
            panel = load_returns_csv(path, policy="drop-incomplete")
        assert panel.asset_ids == ["x"]
        assert "y" in caplog.text

    def test_all_dropped_is_error(self, tmp_path):
        path = write_csv(tmp_path, "date,x\n2001-01,\n2001-02,0.0\n")
        with pytest.raises(DataError, match="empty"):
            load_returns_csv(path, policy="drop-incomplete")

    def test_unparseable_date(self, tmp_path):
        path = write_csv(tmp_path, "date,x\nJan-2001,0.01\n")
        with pytest.raises(DataError, match="date"):
            load_returns_csv(path)

    def test_non_monotone_dates(self, tmp_path):
        path = write_csv(tmp_path, "date,x\n2001-02,0.01\n2001-01,0.01\n")
        with pytest.raises(DataError, match="increasing"):
            load_returns_csv(path)

    def test_calendar_gap(self, tmp_path):
        path = write_csv(tmp_path, "date,x\n2001-01,0.01\n2001-03,0.01\n")
        with pytest.raises(DataError, match="gap"):
            load_returns_csv(path)

    def test_duplicate_ids(self, tmp_path):
        path = write_csv(tmp_path, "date,x,x\n2001-01,0.01,0.02\n")
        with pytest.raises(DataError, match="duplicate"):
            load_returns_csv(path)

    def test_non_numeric_value(self, tmp_path):
        path = write_csv(tmp_path, "date,x\n2001-01,abc\n")
        with pytest.raises(DataError, match="numeric"):
            load_returns_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_returns_csv(tmp_path / "nope.csv")

    def test_bad_policy(self, tmp_path):
        with pytest.raises(ConfigError):
            load_returns_csv(write_csv(tmp_path, WELL_FORMED), policy="ffill")

    def test_return_below_minus_one(self, tmp_path):
        path = write_csv(tmp_path, "date,x\n2001-01,-1.5\n")
        with pytest.raises(DataError, match="-100%"):
            load_returns_csv(path)

    def test_round_trip_bit_exact(self, tmp_path, rng):
        panel = random_panel(rng, n=4, t=30)
        path = tmp_path / "rt.csv"
        panel_to_csv(panel, path)
        back = load_returns_csv(path)
        assert np.array_equal(back.returns, panel.returns)
        assert list(back.dates) == list(panel.dates)
        assert back.asset_ids == panel.asset_ids


class TestReturnsPanel:
    def test_immutable(self, rng):
        panel = random_panel(rng, n=2, t=12)
        with pytest.raises(ValueError):
            panel.returns[0, 0] = 1.0

    def test_row_of(self, rng):
        panel = random_panel(rng, n=2, t=12, start="2010-01")
        assert panel.row_of("2010-03") == 2
        with pytest.raises(DataError):
            panel.row_of("2030-01")

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            ReturnsPanel(
                dates=pd.period_range("2000-01", periods=3, freq="M"),
                asset_ids=["a"],
                returns=np.zeros((2, 1)),
            )


class TestWalkForwardSplits:
    def test_enumerated_count(self, rng):
        # brute-force oracle: count start indices fitting inside the panel
        panel = random_panel(rng, n=2, t=130)
        splits = walk_forward_splits(panel, t_is=120, t_oos=6, step=1)
        expected = len([s for s in range(130) if s + 126 <= 130])
        assert expected == 5
        assert len(splits) == expected

    def test_single_split(self, rng):
        panel = random_panel(rng, n=2, t=126)
        splits = walk_forward_splits(panel, t_is=120, t_oos=6, step=1)
        assert len(splits) == 1
        assert splits[0].cal_range == range(0, 120)
        assert splits[0].test_range == range(120, 126)

    def test_rebalance_date_is_last_calibration_month(self, rng):
        panel = random_panel(rng, n=2, t=130, start="1970-01")
        splits = walk_forward_splits(panel, t_is=120, t_oos=6)
        assert str(splits[0].rebalance_date) == "1979-12"

    def test_too_short(self, rng):
        with pytest.raises(ConfigError, match="too short"):
            walk_forward_splits(random_panel(rng, n=2, t=12), t_is=12, t_oos=6)

    @pytest.mark.parametrize("t_is,t_oos,step", [(1, 6, 1), (12, 0, 1), (12, 6, 0)])
    def test_invalid_parameters(self, rng, t_is, t_oos, step):
        with pytest.raises(ConfigError):
            walk_forward_splits(random_panel(rng, n=2, t=60), t_is, t_oos, step)

    @pytest.mark.parametrize("t_is,t_oos,step", [(12, 6, 1), (24, 3, 2), (6, 2, 5)])
    def test_ranges_contiguous_and_inside(self, rng, t_is, t_oos, step):
        panel = random_panel(rng, n=2, t=80)
        for sp in walk_forward_splits(panel, t_is, t_oos, step):
            assert sp.test_range.start == sp.cal_range.stop
            assert sp.cal_range.start >= 0 and sp.test_range.stop <= panel.n_months
            assert panel.dates[sp.cal_range.stop - 1] == sp.rebalance_date


class TestSliceRows:
    def test_full_range_is_identity(self, rng):
        panel = random_panel(rng, n=3, t=10)
        assert np.array_equal(slice_rows(panel, range(0, 10)), panel.returns)

    def test_interior_rows(self, rng):
        panel = random_panel(rng, n=3, t=5)
        assert np.array_equal(slice_rows(panel, range(2, 4)), panel.returns[2:4])

    def test_empty_range_errors(self, rng):
        with pytest.raises(ConfigError, match="empty"):
            slice_rows(random_panel(rng, n=2, t=5), range(3, 3))

    def test_out_of_bounds(self, rng):
        with pytest.raises(ConfigError, match="bounds"):
            slice_rows(random_panel(rng, n=2, t=5), range(0, 6))

    def test_returns_writable_copy(self, rng):
        panel = random_panel(rng, n=2, t=5)
        out = slice_rows(panel, range(0, 2))
        out[0, 0] = 99.0
        assert panel.returns[0, 0] != 99.0
