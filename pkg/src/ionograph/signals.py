"""Per-link feature derivation from dual-frequency carrier phase.

Relative slant TEC comes from the geometry-free combination; ROT is its
30 s difference in TECU/min and ROTI the population standard deviation of
ROT over a trailing 5-minute window, stamped at the window end. Gaps are
never imputed: filtered or missing epochs split a link's data into arcs and
every derived quantity requires a fully populated window inside one arc.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .timebase import MODEL_CADENCE_S, RAW_CADENCE_S

SPEED_OF_LIGHT_M_S = 299792458.0
K_ION = 40.3e16  # m^3 / (s^2 TECU)

ELEVATION_MASK_DEG = 30.0
SNR_CUTOFF_DBHZ = 25.0
GF_JUMP_THRESHOLD_M = 0.2  # per 30 s; the cited detector's constant is unpublished

ROTI_WINDOW_SAMPLES = 10

OBS_COLUMNS = [
    "t_s",
    "station_id",
    "satellite_id",
    "phase_f1_cycles",
    "phase_f2_cycles",
    "freq_f1_hz",
    "freq_f2_hz",
    "snr_f1_dbhz",
    "snr_f2_dbhz",
    "elevation_deg",
    "azimuth_deg",
]

FEATURE_COLUMNS = ["t_s", "station", "sat", "roti", "dtec_rate", "eff_snr"]


@dataclass(frozen=True)
class ObsRecord:
    """One 30-s raw line-of-sight observation."""

    t_s: int
    station_id: str
    satellite_id: str
    phase_f1_cycles: float
    phase_f2_cycles: float
    freq_f1_hz: float
    freq_f2_hz: float
    snr_f1_dbhz: float
    snr_f2_dbhz: float
    elevation_deg: float
    azimuth_deg: float


@dataclass
class FeatureSeries:
    """5-minute cadence features for one (station, satellite) link."""

    station_id: str
    satellite_id: str
    t_s: np.ndarray
    roti: np.ndarray
    dtec_rate: np.ndarray
    eff_snr: np.ndarray

    def __len__(self) -> int:
        return len(self.t_s)


def gf_range_m(phase_f1_cycles, phase_f2_cycles, freq_f1_hz, freq_f2_hz):
    """Geometry-free combination L1*lambda1 - L2*lambda2 in meters."""
    lam1 = SPEED_OF_LIGHT_M_S / np.asarray(freq_f1_hz, dtype=float)
    lam2 = SPEED_OF_LIGHT_M_S / np.asarray(freq_f2_hz, dtype=float)
    return np.asarray(phase_f1_cycles) * lam1 - np.asarray(phase_f2_cycles) * lam2


def stec_from_gf_m(gf_m, freq_f1_hz, freq_f2_hz):
    """Relative slant TEC (TECU) from the geometry-free range in meters."""
    f1 = np.asarray(freq_f1_hz, dtype=float)
    f2 = np.asarray(freq_f2_hz, dtype=float)
    if np.any(f1 == f2):
        raise ValueError("geometry-free combination needs two distinct frequencies")
    return np.asarray(gf_m) * f1 ** 2 * f2 ** 2 / (K_ION * (f1 ** 2 - f2 ** 2))


def gf_m_from_stec(stec_tecu, freq_f1_hz, freq_f2_hz):
    """Inverse of :func:`stec_from_gf_m`; used by the scenario generator."""
    f1 = np.asarray(freq_f1_hz, dtype=float)
    f2 = np.asarray(freq_f2_hz, dtype=float)
    return np.asarray(stec_tecu) * K_ION * (f1 ** 2 - f2 ** 2) / (f1 ** 2 * f2 ** 2)


def geometry_free_stec(rec: ObsRecord) -> float:
    """Relative slant TEC of one record, in TECU."""
    gf = gf_range_m(rec.phase_f1_cycles, rec.phase_f2_cycles, rec.freq_f1_hz, rec.freq_f2_hz)
    return float(stec_from_gf_m(gf, rec.freq_f1_hz, rec.freq_f2_hz))


def quality_filter(
    rec: ObsRecord,
    prev_gf_m: float | None = None,
    prev_t_s: int | None = None,
    elevation_mask_deg: float = ELEVATION_MASK_DEG,
    snr_cutoff_dbhz: float = SNR_CUTOFF_DBHZ,
    jump_threshold_m: float = GF_JUMP_THRESHOLD_M,
) -> tuple[bool, bool]:
    """(keep, artifact) decision for one record.

    ``artifact`` is set when the geometry-free range jumps by more than the
    threshold relative to the previous kept, 30-s-adjacent epoch; such epochs
    start a new arc downstream.
    """
    keep = rec.elevation_deg >= elevation_mask_deg and min(
        rec.snr_f1_dbhz, rec.snr_f2_dbhz
    ) >= snr_cutoff_dbhz
    artifact = False
    if keep and prev_gf_m is not None and prev_t_s is not None and rec.t_s - prev_t_s == RAW_CADENCE_S:
        gf = float(gf_range_m(rec.phase_f1_cycles, rec.phase_f2_cycles, rec.freq_f1_hz, rec.freq_f2_hz))
        artifact = abs(gf - prev_gf_m) > jump_threshold_m
    return keep, artifact


def rot_series(t_s: np.ndarray, stec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROT (TECU/min) at epochs whose 30-s predecessor is present.

    Input epochs must be strictly increasing; non-adjacent steps are gaps.
    """
    t = np.asarray(t_s, dtype=np.int64)
    s = np.asarray(stec, dtype=float)
    if len(t) < 2:
        return np.empty(0, dtype=np.int64), np.empty(0)
    adj = np.diff(t) == RAW_CADENCE_S
    rot = np.diff(s) / (RAW_CADENCE_S / 60.0)
    return t[1:][adj], rot[adj]


def roti_series(
    t_rot: np.ndarray, rot: np.ndarray, window: int = ROTI_WINDOW_SAMPLES
) -> tuple[np.ndarray, np.ndarray]:
    """Population std of ROT over trailing fully-populated windows.

    Stamped at window end on the 5-minute grid; windows containing any gap
    emit nothing.
    """
    t = np.asarray(t_rot, dtype=np.int64)
    r = np.asarray(rot, dtype=float)
    if len(t) < window:
        return np.empty(0, dtype=np.int64), np.empty(0)
    wt = np.lib.stride_tricks.sliding_window_view(t, window)
    wr = np.lib.stride_tricks.sliding_window_view(r, window)
    full = wt[:, -1] - wt[:, 0] == (window - 1) * RAW_CADENCE_S
    stamped = wt[:, -1] % MODEL_CADENCE_S == 0
    sel = full & stamped
    return wt[sel, -1], wr[sel].std(axis=1)


def _arc_bounds(t_s: np.ndarray, gf_m: np.ndarray, jump_threshold_m: float) -> np.ndarray:
    """Start indices of arcs; gaps and geometry-free jumps terminate arcs."""
    breaks = np.zeros(len(t_s), dtype=bool)
    if len(t_s) > 1:
        dt = np.diff(t_s)
        jump = np.abs(np.diff(gf_m)) > jump_threshold_m
        breaks[1:] = (dt != RAW_CADENCE_S) | ((dt == RAW_CADENCE_S) & jump)
    starts = np.flatnonzero(np.concatenate([[True], breaks[1:]]))
    return np.append(starts, len(t_s))


def derive_link_features(
    records: pd.DataFrame,
    elevation_mask_deg: float = ELEVATION_MASK_DEG,
    snr_cutoff_dbhz: float = SNR_CUTOFF_DBHZ,
    jump_threshold_m: float = GF_JUMP_THRESHOLD_M,
) -> FeatureSeries:
    """Full 30 s -> 5 min derivation for one (station, satellite) link.

    ``records`` must hold the OBS_COLUMNS of a single link sorted by time.
    A 5-minute row is emitted only when the trailing window (11 consecutive
    30-s epochs) lies inside a single arc.
    """
    station = str(records["station_id"].iloc[0]) if len(records) else ""
    sat = str(records["satellite_id"].iloc[0]) if len(records) else ""

    keep = (records["elevation_deg"].to_numpy() >= elevation_mask_deg) & (
        np.minimum(records["snr_f1_dbhz"].to_numpy(), records["snr_f2_dbhz"].to_numpy())
        >= snr_cutoff_dbhz
    )
    kept = records.loc[keep]
    t = kept["t_s"].to_numpy(dtype=np.int64)
    if len(t) == 0:
        empty = np.empty(0)
        return FeatureSeries(station, sat, np.empty(0, dtype=np.int64), empty, empty, empty)

    gf = gf_range_m(
        kept["phase_f1_cycles"].to_numpy(),
        kept["phase_f2_cycles"].to_numpy(),
        kept["freq_f1_hz"].to_numpy(),
        kept["freq_f2_hz"].to_numpy(),
    )
    stec = stec_from_gf_m(gf, kept["freq_f1_hz"].to_numpy(), kept["freq_f2_hz"].to_numpy())
    eff = np.minimum(kept["snr_f1_dbhz"].to_numpy(), kept["snr_f2_dbhz"].to_numpy())

    out_t, out_roti, out_dtec, out_snr = [], [], [], []
    bounds = _arc_bounds(t, gf, jump_threshold_m)
    n_win = ROTI_WINDOW_SAMPLES
    for i0, i1 in zip(bounds[:-1], bounds[1:]):
        if i1 - i0 < n_win + 1:
            continue
        ta, sa, ea = t[i0:i1], stec[i0:i1], eff[i0:i1]
        rot = np.diff(sa) / (RAW_CADENCE_S / 60.0)
        wr = np.lib.stride_tricks.sliding_window_view(rot, n_win)
        ends = ta[n_win:]  # window [k-10, k] ends at index k >= 10
        sel = ends % MODEL_CADENCE_S == 0
        if not np.any(sel):
            continue
        idx = np.flatnonzero(sel) + n_win
        out_t.append(ta[idx])
        out_roti.append(wr[idx - n_win].std(axis=1))
        out_dtec.append((sa[idx] - sa[idx - n_win]) / (MODEL_CADENCE_S / 60.0))
        out_snr.append(ea[idx])

    if not out_t:
        empty = np.empty(0)
        return FeatureSeries(station, sat, np.empty(0, dtype=np.int64), empty, empty, empty)
    return FeatureSeries(
        station,
        sat,
        np.concatenate(out_t),
        np.concatenate(out_roti),
        np.concatenate(out_dtec),
        np.concatenate(out_snr),
    )


def derive_features(
    obs: pd.DataFrame,
    elevation_mask_deg: float = ELEVATION_MASK_DEG,
    snr_cutoff_dbhz: float = SNR_CUTOFF_DBHZ,
    jump_threshold_m: float = GF_JUMP_THRESHOLD_M,
) -> pd.DataFrame:
    """Derive the 5-minute feature table for a raw observation table.

    Returns FEATURE_COLUMNS sorted by (t_s, station, sat).
    """
    frames = []
    for (station, sat), grp in obs.groupby(["station_id", "satellite_id"], sort=True):
        fs = derive_link_features(
            grp.sort_values("t_s"), elevation_mask_deg, snr_cutoff_dbhz, jump_threshold_m
        )
        if len(fs) == 0:
            continue
        frames.append(
            pd.DataFrame(
                {
                    "t_s": fs.t_s,
                    "station": station,
                    "sat": sat,
                    "roti": fs.roti,
                    "dtec_rate": fs.dtec_rate,
                    "eff_snr": fs.eff_snr,
                }
            )
        )
    if not frames:
        return pd.DataFrame(columns=FEATURE_COLUMNS)
    out = pd.concat(frames, ignore_index=True)
    return out.sort_values(["t_s", "station", "sat"], ignore_index=True)


def read_obs_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in OBS_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"observation file {path} missing columns {missing}")
    return df[OBS_COLUMNS]
