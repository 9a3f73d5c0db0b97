import numpy as np
import pandas as pd
import pytest

from ionograph.qc import (
    LABEL_CONFIRMED,
    LABEL_INVALID,
    LABEL_QUIET,
    LABEL_UNVERIFIED,
    EventSegment,
    cross_validate,
    detect_segments,
    label_statistics,
    label_table,
    split_timesteps,
)

T = 300  # model cadence


def grid(n, start=0):
    return np.arange(start, start + n * T, T, dtype=np.int64)


def seg(start, end, peak=0.5, station="RXA", sat="G01"):
    return EventSegment(station, sat, start * T, end * T, peak, start * T)


class TestDetectSegments:
    def test_all_quiet(self):
        assert detect_segments(grid(20), np.full(20, 0.05)) == []

    def test_single_epoch_above_threshold(self):
        roti = np.full(9, 0.05)
        roti[4] = 0.31
        segs = detect_segments(grid(9), roti)
        assert len(segs) == 1
        assert segs[0].start_s == segs[0].end_s == 4 * T
        assert segs[0].peak_roti == pytest.approx(0.31)

    def test_sub_threshold_peak_rejected(self):
        roti = np.full(9, 0.05)
        roti[3:6] = [0.2, 0.29, 0.2]
        assert detect_segments(grid(9), roti) == []

    def test_traced_to_baseline(self):
        roti = np.array([0.05, 0.18, 0.25, 0.6, 0.22, 0.16, 0.05])
        segs = detect_segments(grid(7), roti)
        assert len(segs) == 1
        assert segs[0].start_s == 1 * T and segs[0].end_s == 5 * T
        assert segs[0].peak_time_s == 3 * T

    def test_gap_terminates_tracing(self):
        t = np.array([0, T, 2 * T, 4 * T, 5 * T])  # missing 3T
        roti = np.array([0.2, 0.6, 0.2, 0.2, 0.5])
        segs = detect_segments(t, roti)
        assert [(s.start_s, s.end_s) for s in segs] == [(0, 2 * T), (4 * T, 5 * T)]

    def test_boundary_epoch_at_baseline_excluded(self):
        # ROTI == baseline is not elevated (strict >)
        roti = np.array([0.15, 0.4, 0.15])
        segs = detect_segments(grid(3), roti)
        assert len(segs) == 1
        assert segs[0].start_s == segs[0].end_s == T


class TestCrossValidate:
    def test_identical_segments_confirmed(self):
        a, b = [seg(2, 6)], [seg(2, 6, station="RXB")]
        out = cross_validate(a, b, grid(20))
        assert all(v == LABEL_CONFIRMED for v in out.values())
        assert set(out) == set(range(2 * T, 6 * T + 1, T))

    def test_exactly_half_overlap_confirmed(self):
        # seg_a has 4 epochs [2..5]; seg_b covers [4..5] -> fraction exactly 0.5
        a, b = [seg(2, 5)], [seg(4, 5, station="RXB")]
        out = cross_validate(a, b, grid(20))
        assert all(v == LABEL_CONFIRMED for v in out.values())

    def test_under_half_overlap_with_coverage_invalid(self):
        a, b = [seg(2, 5)], [seg(5, 5, station="RXB")]  # 1/4 overlap
        out = cross_validate(a, b, grid(20))
        assert all(v == LABEL_INVALID for v in out.values())

    def test_no_coverage_unverified(self):
        a = [seg(2, 5)]
        out = cross_validate(a, [], np.empty(0, dtype=np.int64))
        assert all(v == LABEL_UNVERIFIED for v in out.values())

    def test_full_quiet_coverage_invalid(self):
        a = [seg(2, 5)]
        out = cross_validate(a, [], grid(20))
        assert all(v == LABEL_INVALID for v in out.values())

    def test_partial_coverage_tie_unverified(self):
        # B covers 1 of 4 epochs (25% < 50%) and is quiet there
        a = [seg(2, 5)]
        out = cross_validate(a, [], np.array([3 * T]))
        assert all(v == LABEL_UNVERIFIED for v in out.values())


class TestLabelTable:
    def make_features(self, roti_a, roti_b, t=None):
        t = grid(len(roti_a)) if t is None else t
        fa = pd.DataFrame(
            {"t_s": t, "station": "RXA", "sat": "G01", "roti": roti_a, "dtec_rate": 0.0, "eff_snr": 40.0}
        )
        fb = pd.DataFrame(
            {"t_s": grid(len(roti_b)), "station": "RXB", "sat": "G01", "roti": roti_b, "dtec_rate": 0.0, "eff_snr": 40.0}
        )
        return pd.concat([fa, fb], ignore_index=True)

    def test_every_epoch_labeled_once(self):
        rng = np.random.default_rng(0)
        roti_a = rng.uniform(0, 0.6, 50)
        roti_b = rng.uniform(0, 0.6, 50)
        labs = label_table(self.make_features(roti_a, roti_b))
        assert len(labs) == 100
        assert labs.duplicated(["t_s", "station", "sat"]).sum() == 0
        assert set(labs["label"]).issubset({1, 0, -1, -2})

    def test_confirmed_pair(self):
        roti = np.full(20, 0.05)
        roti[8:12] = 0.8
        labs = label_table(self.make_features(roti, roti.copy()))
        ev = labs[(labs["t_s"] >= 8 * T) & (labs["t_s"] <= 11 * T)]
        assert (ev["label"] == LABEL_CONFIRMED).all()
        rest = labs[(labs["t_s"] < 8 * T) | (labs["t_s"] > 11 * T)]
        assert (rest["label"] == LABEL_QUIET).all()

    def test_single_station_event_invalid(self):
        roti_a = np.full(20, 0.05)
        roti_a[8:12] = 0.8
        labs = label_table(self.make_features(roti_a, np.full(20, 0.05)))
        a_ev = labs[(labs["station"] == "RXA") & (labs["t_s"] >= 8 * T) & (labs["t_s"] <= 11 * T)]
        assert (a_ev["label"] == LABEL_INVALID).all()
        assert (labs[labs["station"] == "RXB"]["label"] == LABEL_QUIET).all()

    def test_event_during_other_station_outage_unverified(self):
        roti_a = np.full(20, 0.05)
        roti_a[8:12] = 0.8
        fa = pd.DataFrame(
            {"t_s": grid(20), "station": "RXA", "sat": "G01", "roti": roti_a, "dtec_rate": 0.0, "eff_snr": 40.0}
        )
        # B only has data before the event
        fb = pd.DataFrame(
            {"t_s": grid(5), "station": "RXB", "sat": "G01", "roti": 0.05, "dtec_rate": 0.0, "eff_snr": 40.0}
        )
        labs = label_table(pd.concat([fa, fb], ignore_index=True))
        a_ev = labs[(labs["station"] == "RXA") & (labs["t_s"] >= 8 * T) & (labs["t_s"] <= 11 * T)]
        assert (a_ev["label"] == LABEL_UNVERIFIED).all()

    def test_three_stations_rejected(self):
        f = self.make_features(np.full(5, 0.05), np.full(5, 0.05))
        f = pd.concat(
            [f, pd.DataFrame({"t_s": grid(5), "station": "RXC", "sat": "G01", "roti": 0.05, "dtec_rate": 0.0, "eff_snr": 40.0})],
            ignore_index=True,
        )
        with pytest.raises(ValueError):
            label_table(f)


class TestSplits:
    def make_labels(self, n, amb_at=(), conf_at=()):
        rows = []
        for i in range(n):
            lab = 0
            if i in amb_at:
                lab = -1
            rows.append({"t_s": i * T, "station": "RXA", "sat": "G01", "label": lab})
            rows.append(
                {"t_s": i * T, "station": "RXA", "sat": "G02", "label": 1 if i in conf_at else 0}
            )
        return pd.DataFrame(rows)

    def test_ratios_and_gaps(self):
        n = 1000
        labels = self.make_labels(n)
        splits = split_timesteps(grid(n), labels)
        assert len(splits["train"]) == 700 - 24
        assert len(splits["val"]) == 150 - 24
        assert len(splits["test"]) == 150
        # chronological, disjoint, gap-separated
        assert splits["train"].max() < splits["val"].min() - 23 * T
        assert splits["val"].max() < splits["test"].min() - 23 * T

    def test_ambiguous_only_dropped_from_train_not_test(self):
        n = 1000
        amb_train, amb_test = {10, 11}, {900}
        labels = self.make_labels(n, amb_at=amb_train | amb_test)
        splits = split_timesteps(grid(n), labels)
        assert not np.isin([10 * T, 11 * T], splits["train"]).any()
        assert np.isin([900 * T], splits["test"]).all()

    def test_mixed_confirmed_ambiguous_retained(self):
        labels = self.make_labels(1000, amb_at={10}, conf_at={10})
        splits = split_timesteps(grid(1000), labels)
        assert np.isin([10 * T], splits["train"]).all()

    def test_too_small_errors(self):
        with pytest.raises(ValueError):
            split_timesteps(grid(40), self.make_labels(40))


def test_label_statistics_layout():
    n = 1000
    labels = pd.DataFrame(
        {
            "t_s": grid(n),
            "station": "RXA",
            "sat": "G01",
            "label": np.where(np.arange(n) % 12 == 0, 1, 0),
        }
    )
    splits = split_timesteps(grid(n), labels)
    stats = label_statistics(labels, splits)
    assert list(stats["split"]) == ["train", "val", "test", "total"]
    total = stats[stats["split"] == "total"].iloc[0]
    assert total["nodes"] == sum(len(splits[s]) for s in ["train", "val", "test"])
    assert total["event"] + total["quiet"] == total["nodes"]
