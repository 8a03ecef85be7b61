"""Dataset ingestion, splits, windowing, and run configuration."""

import numpy as np
import pytest

from bsat.data import (
    RunConfig,
    aggregate,
    chronological_split,
    config_text,
    load_config,
    load_csv,
    parse_config_text,
    split_windows,
    windows,
)


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("date,OT,other\n" + "\n".join(
        f"2021-01-{i+1:02d},{float(i)},{i * 2}" for i in range(3)
    ) + "\n")
    return path


class TestLoadCsv:
    def test_three_row_file(self, toy_csv):
        series = load_csv(toy_csv, "OT")
        assert np.array_equal(series, [0.0, 1.0, 2.0])

    def test_missing_column(self, toy_csv):
        with pytest.raises(ValueError, match="'HUFL' not in header"):
            load_csv(toy_csv, "HUFL")

    def test_unparsable_cell_reports_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\nx,4\n")
        with pytest.raises(ValueError, match="row 3"):
            load_csv(path, "a")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_csv(path, "a")

    def test_header_only(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(path, "a")


class TestAggregate:
    def test_factor_three(self):
        series = np.arange(9.0)
        out = aggregate(series, 3)
        assert np.array_equal(out, [1.0, 4.0, 7.0])

    def test_identity(self):
        series = np.arange(5.0)
        assert np.array_equal(aggregate(series, 1), series)

    def test_pairs(self):
        assert np.array_equal(aggregate(np.array([1.0, 2, 3, 4]), 2), [1.5, 3.5])

    def test_remainder_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="dropping 2"):
            out = aggregate(np.arange(8.0), 3)
        assert out.size == 2

    def test_alabama_shape(self):
        # 105120 five-minute samples aggregate 3:1 into 35040 quarter-hours
        series = np.zeros(105120)
        assert aggregate(series, 3).size == 35040

    def test_invalid_factor(self):
        with pytest.raises(ValueError):
            aggregate(np.arange(4.0), 0)


class TestChronologicalSplit:
    def test_etth1_arithmetic(self):
        ds = chronological_split(np.zeros(17420) + np.arange(17420) * 1e-6)
        assert ds.split_sizes() == (10452, 3484, 3484)

    def test_small_series(self):
        ds = chronological_split(np.arange(10.0))
        assert ds.split_sizes() == (6, 2, 2)

    def test_train_stats_only(self):
        rng = np.random.default_rng(0)
        raw = rng.normal(size=1000)
        ds = chronological_split(raw)
        train_raw = raw[:600]
        assert ds.train_mean == pytest.approx(train_raw.mean())
        assert ds.train_std == pytest.approx(train_raw.std())
        # stored normalized by those stats
        assert np.allclose(ds.values, (raw - ds.train_mean) / ds.train_std)

    def test_standard_normal_stats(self):
        rng = np.random.default_rng(1)
        ds = chronological_split(rng.normal(size=200000))
        assert ds.train_mean == pytest.approx(0.0, abs=0.02)
        assert ds.train_std == pytest.approx(1.0, abs=0.02)

    def test_too_short(self):
        with pytest.raises(ValueError, match="too short"):
            chronological_split(np.arange(4.0))

    def test_no_leakage_from_test_perturbation(self):
        rng = np.random.default_rng(2)
        raw = rng.normal(size=1000)
        ds1 = chronological_split(raw)
        perturbed = raw.copy()
        perturbed[900:] += 100.0  # test region only
        ds2 = chronological_split(perturbed)
        assert ds1.train_mean == ds2.train_mean
        assert ds1.train_std == ds2.train_std
        assert np.array_equal(ds1.split("train"), ds2.split("train"))
        assert np.array_equal(ds1.split("val"), ds2.split("val"))


class TestWindows:
    def test_count_arithmetic(self):
        pairs = split_windows(np.arange(100.0), 50, 10, 10)
        assert len(pairs) == 5

    def test_stride_equals_length(self):
        pairs = split_windows(np.arange(60.0), 50, 10, 60)
        assert len(pairs) == 1

    def test_target_adjacency(self):
        pairs = split_windows(np.arange(100.0), 50, 10, 25)
        for start, lookback, target in pairs:
            assert lookback[-1] == start + 49
            assert target[0] == start + 50  # next sample after the lookback

    def test_no_split_crossing(self):
        ds = chronological_split(np.arange(100.0))
        out = windows(ds, 12, 4, 7)
        train = ds.split("train")
        for start, lookback, target in out["train"]:
            assert start + 16 <= train.size
        assert all(len(out[k]) > 0 for k in ("train", "val", "test"))

    def test_infeasible(self):
        with pytest.raises(ValueError, match="exceeds"):
            split_windows(np.arange(30.0), 50, 10, 1)


class TestRunConfig:
    def test_defaults_valid(self):
        config = RunConfig()
        assert config.tokenizer == "bsat"

    def test_unknown_tokenizer(self):
        with pytest.raises(ValueError, match="unknown tokenizer"):
            RunConfig(tokenizer="dct")

    def test_roundtrip_through_text(self, tmp_path):
        config = RunConfig(data_path="x.csv", target_column="OT", budget=90)
        path = tmp_path / "run.cfg"
        path.write_text(config_text(config))
        loaded = load_config(path)
        assert loaded == config

    def test_missing_key_named(self, tmp_path):
        config = RunConfig()
        text = config_text(config)
        text = "\n".join(l for l in text.splitlines() if not l.startswith("budget"))
        path = tmp_path / "run.cfg"
        path.write_text(text)
        with pytest.raises(ValueError, match="missing key 'budget'"):
            load_config(path)

    def test_unknown_key_named(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(config_text(RunConfig()) + "mystery = 1\n")
        with pytest.raises(ValueError, match="unknown key 'mystery'"):
            load_config(path)

    def test_comments_and_blank_lines(self):
        parsed = parse_config_text("# comment\n\nbudget = 90  # trailing\n")
        assert parsed == {"budget": "90"}

    def test_malformed_line(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_config_text("budget 90\n")
