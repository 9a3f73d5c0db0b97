import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionograph.signals import (
    GF_JUMP_THRESHOLD_M,
    OBS_COLUMNS,
    ObsRecord,
    derive_features,
    derive_link_features,
    geometry_free_stec,
    gf_m_from_stec,
    gf_range_m,
    quality_filter,
    rot_series,
    roti_series,
    stec_from_gf_m,
)

F1, F2 = 1575.42e6, 1227.60e6
C = 299792458.0


def make_record(t_s=0, phase_f1=0.0, phase_f2=0.0, snr1=45.0, snr2=42.0, el=60.0):
    return ObsRecord(
        t_s=t_s,
        station_id="RXA",
        satellite_id="G01",
        phase_f1_cycles=phase_f1,
        phase_f2_cycles=phase_f2,
        freq_f1_hz=F1,
        freq_f2_hz=F2,
        snr_f1_dbhz=snr1,
        snr_f2_dbhz=snr2,
        elevation_deg=el,
        azimuth_deg=100.0,
    )


def obs_frame(t, stec, snr1=45.0, snr2=42.0, el=60.0, station="RXA", sat="G01"):
    """Build raw records whose geometry-free combination reproduces `stec`."""
    gf = gf_m_from_stec(np.asarray(stec, dtype=float), F1, F2)
    lam1 = C / F1
    return pd.DataFrame(
        {
            "t_s": np.asarray(t, dtype=np.int64),
            "station_id": station,
            "satellite_id": sat,
            "phase_f1_cycles": gf / lam1,
            "phase_f2_cycles": 0.0,
            "freq_f1_hz": F1,
            "freq_f2_hz": F2,
            "snr_f1_dbhz": snr1,
            "snr_f2_dbhz": snr2,
            "elevation_deg": el,
            "azimuth_deg": 100.0,
        }
    )[OBS_COLUMNS]


class TestGeometryFreeStec:
    def test_zero_combination(self):
        lam1, lam2 = C / F1, C / F2
        rec = make_record(phase_f1=1000.0, phase_f2=1000.0 * lam1 / lam2)
        assert geometry_free_stec(rec) == pytest.approx(0.0, abs=1e-9)

    def test_linearity(self):
        a = geometry_free_stec(make_record(phase_f1=10.0, phase_f2=3.0))
        b = geometry_free_stec(make_record(phase_f1=20.0, phase_f2=6.0))
        assert b == pytest.approx(2.0 * a, rel=1e-12)

    def test_one_meter_constant(self):
        # frozen: f1^2 f2^2 / (K (f1^2 - f2^2)) for GPS L1/L2
        assert stec_from_gf_m(1.0, F1, F2) == pytest.approx(9.519643288304653, rel=1e-12)

    def test_equal_frequencies_rejected(self):
        with pytest.raises(ValueError):
            stec_from_gf_m(1.0, F1, F1)

    def test_inverse_round_trip(self):
        s = np.array([-3.0, 0.0, 12.5])
        np.testing.assert_allclose(stec_from_gf_m(gf_m_from_stec(s, F1, F2), F1, F2), s)


class TestRot:
    def test_constant_stec(self):
        t = np.arange(0, 300, 30)
        tr, rot = rot_series(t, np.full(len(t), 7.0))
        assert len(tr) == len(t) - 1
        np.testing.assert_allclose(rot, 0.0)

    def test_ramp(self):
        t = np.arange(0, 300, 30)
        stec = 0.1 * np.arange(len(t))  # +0.1 TECU per 30 s
        _, rot = rot_series(t, stec)
        np.testing.assert_allclose(rot, 0.2)

    def test_gap_breaks(self):
        t = np.array([0, 30, 90, 120])  # missing 60
        tr, rot = rot_series(t, np.array([0.0, 1.0, 2.0, 3.0]))
        assert list(tr) == [30, 120]


class TestRoti:
    def test_constant_rot(self):
        t = np.arange(30, 330, 30)
        ts, roti = roti_series(t, np.full(10, 0.5))
        assert list(ts) == [300]
        np.testing.assert_allclose(roti, 0.0)

    def test_alternating(self):
        t = np.arange(30, 330, 30)
        rot = 0.4 * (-1.0) ** np.arange(10)
        _, roti = roti_series(t, rot)
        # population std of alternating +-a is exactly a
        np.testing.assert_allclose(roti, 0.4, rtol=1e-12)

    def test_incomplete_window(self):
        t = np.arange(30, 240, 30)  # 7 samples
        ts, _ = roti_series(t, np.ones(len(t)))
        assert len(ts) == 0

    def test_gapped_window_skipped(self):
        t = np.concatenate([np.arange(30, 150, 30), np.arange(180, 330, 30)])
        assert len(t) == 9
        ts, _ = roti_series(t, np.ones(9))
        assert len(ts) == 0


class TestQualityFilter:
    def test_elevation_mask(self):
        keep, _ = quality_filter(make_record(el=29.9))
        assert not keep
        keep, _ = quality_filter(make_record(el=30.0))
        assert keep

    def test_snr_cutoff(self):
        keep, _ = quality_filter(make_record(snr1=40.0, snr2=24.9))
        assert not keep
        keep, _ = quality_filter(make_record(snr1=25.0, snr2=25.0))
        assert keep

    def test_jump_flag(self):
        prev = make_record(t_s=0)
        prev_gf = float(gf_range_m(prev.phase_f1_cycles, prev.phase_f2_cycles, F1, F2))
        lam1 = C / F1
        jumped = make_record(t_s=30, phase_f1=5.0 * GF_JUMP_THRESHOLD_M / lam1)
        keep, artifact = quality_filter(jumped, prev_gf_m=prev_gf, prev_t_s=0)
        assert keep and artifact

    def test_no_jump_across_gap(self):
        lam1 = C / F1
        jumped = make_record(t_s=90, phase_f1=5.0 * GF_JUMP_THRESHOLD_M / lam1)
        _, artifact = quality_filter(jumped, prev_gf_m=0.0, prev_t_s=0)
        assert not artifact


class TestDownsample:
    def test_empty(self):
        fs = derive_link_features(obs_frame([], []))
        assert len(fs) == 0

    def test_two_stamps_from_ten_minutes(self):
        t = np.arange(0, 601, 30)  # 21 epochs, windows complete at 300 and 600
        fs = derive_link_features(obs_frame(t, np.zeros(len(t))))
        assert list(fs.t_s) == [300, 600]

    def test_ramp_dtec_rate(self):
        t = np.arange(0, 601, 30)
        stec = 0.05 * np.arange(len(t))  # 0.1 TECU/min ramp
        fs = derive_link_features(obs_frame(t, stec))
        np.testing.assert_allclose(fs.dtec_rate, 0.1, rtol=1e-9)
        np.testing.assert_allclose(fs.roti, 0.0, atol=1e-9)

    def test_eff_snr_is_pair_minimum(self):
        t = np.arange(0, 301, 30)
        fs = derive_link_features(obs_frame(t, np.zeros(len(t)), snr1=45.0, snr2=31.5))
        np.testing.assert_allclose(fs.eff_snr, 31.5)

    def test_jump_breaks_series(self):
        t = np.arange(0, 601, 30)
        stec = np.zeros(len(t))
        stec[12:] += stec_from_gf_m(10 * GF_JUMP_THRESHOLD_M, F1, F2)  # jump at t=360
        fs = derive_link_features(obs_frame(t, stec))
        # second window [300,600] spans the break -> only the first stamp survives
        assert list(fs.t_s) == [300]

    def test_filtered_epochs_become_gaps(self):
        t = np.arange(0, 601, 30)
        df = obs_frame(t, np.zeros(len(t)))
        df.loc[df["t_s"] == 450, "snr_f2_dbhz"] = 10.0
        fs = derive_link_features(df)
        assert list(fs.t_s) == [300]

    def test_filter_derive_commutes(self):
        rng = np.random.default_rng(0)
        t = np.arange(0, 1801, 30)
        stec = np.cumsum(rng.normal(0, 0.05, len(t)))
        df = obs_frame(t, stec)
        low = rng.choice(len(t), 8, replace=False)
        df.loc[df.index[low], "elevation_deg"] = 20.0
        a = derive_link_features(df)
        b = derive_link_features(df[df["elevation_deg"] >= 30.0])
        np.testing.assert_array_equal(a.t_s, b.t_s)
        np.testing.assert_allclose(a.roti, b.roti)
        np.testing.assert_allclose(a.dtec_rate, b.dtec_rate)

    @given(st.floats(-50.0, 50.0))
    @settings(max_examples=25, deadline=None)
    def test_roti_invariant_to_stec_offset(self, offset):
        rng = np.random.default_rng(7)
        t = np.arange(0, 901, 30)
        stec = np.cumsum(rng.normal(0, 0.1, len(t)))
        a = derive_link_features(obs_frame(t, stec))
        b = derive_link_features(obs_frame(t, stec + offset))
        np.testing.assert_allclose(a.roti, b.roti, atol=1e-9)
        assert np.all(a.roti >= 0)

    def test_no_imputation(self):
        rng = np.random.default_rng(3)
        t = np.arange(0, 3601, 30)
        keep = rng.random(len(t)) > 0.15
        t = t[keep]
        fs = derive_link_features(obs_frame(t, np.zeros(len(t))))
        # complete windows: stamps on the 5-min grid whose 11 epochs survive
        complete = 0
        tset = set(t.tolist())
        for stamp in range(300, 3601, 300):
            if all(stamp - 30 * j in tset for j in range(11)):
                complete += 1
        assert len(fs) <= complete
        assert len(fs) == complete  # exact under gap-only structure


def test_derive_features_multi_link():
    t = np.arange(0, 301, 30)
    df = pd.concat(
        [
            obs_frame(t, np.zeros(len(t)), station="RXA", sat="G01"),
            obs_frame(t, np.zeros(len(t)), station="RXB", sat="G02"),
        ],
        ignore_index=True,
    )
    out = derive_features(df)
    assert set(zip(out["station"], out["sat"])) == {("RXA", "G01"), ("RXB", "G02")}
    assert (out["t_s"] == 300).all()
