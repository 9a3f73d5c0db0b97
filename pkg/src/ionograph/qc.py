"""Event segmentation and zero-baseline cross-validation labeling.

Per-link ROTI series are segmented into contiguous runs above a quiet
baseline; runs whose peak stays at or below 0.3 TECU/min are reclassified
as quiet. Retained segments are cross-validated against the co-located
second receiver and every data epoch receives exactly one of four labels:

    confirmed (+1), quiet (0), unverified (-1), invalid (-2)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .timebase import MODEL_CADENCE_S

LABEL_CONFIRMED = 1
LABEL_QUIET = 0
LABEL_UNVERIFIED = -1
LABEL_INVALID = -2

QUIET_BASELINE = 0.15  # TECU/min; the event detector's baseline level
PEAK_THRESHOLD = 0.3  # TECU/min; quiet/event mode separation
OVERLAP_MIN_FRACTION = 0.5
COVERAGE_MIN_FRACTION = 0.5

LABEL_COLUMNS = ["t_s", "station", "sat", "label"]


@dataclass(frozen=True)
class EventSegment:
    station_id: str
    satellite_id: str
    start_s: int
    end_s: int  # inclusive, on the 5-min grid
    peak_roti: float
    peak_time_s: int

    @property
    def n_epochs(self) -> int:
        return (self.end_s - self.start_s) // MODEL_CADENCE_S + 1

    def epochs(self) -> np.ndarray:
        return np.arange(self.start_s, self.end_s + 1, MODEL_CADENCE_S, dtype=np.int64)


def detect_segments(
    t_s: np.ndarray,
    roti: np.ndarray,
    station_id: str = "",
    satellite_id: str = "",
    quiet_baseline: float = QUIET_BASELINE,
    peak_threshold: float = PEAK_THRESHOLD,
) -> list[EventSegment]:
    """Segments of contiguous elevated ROTI whose peak exceeds the threshold.

    Candidate runs are maximal stretches of 5-min-adjacent epochs with
    ROTI > quiet_baseline; data gaps terminate a run. Runs peaking at or
    below ``peak_threshold`` are dropped (their epochs stay quiet).
    """
    t = np.asarray(t_s, dtype=np.int64)
    r = np.asarray(roti, dtype=float)
    if len(t) == 0:
        return []
    order = np.argsort(t)
    t, r = t[order], r[order]

    segments: list[EventSegment] = []
    run_start = None
    prev_t = None
    for i in range(len(t)):
        elevated = r[i] > quiet_baseline
        contiguous = prev_t is not None and t[i] - prev_t == MODEL_CADENCE_S
        if run_start is not None and (not elevated or not contiguous):
            segments.append(_close_run(t, r, run_start, i - 1, station_id, satellite_id))
            run_start = None
        if elevated and run_start is None:
            run_start = i
        prev_t = t[i]
    if run_start is not None:
        segments.append(_close_run(t, r, run_start, len(t) - 1, station_id, satellite_id))
    return [s for s in segments if s.peak_roti > peak_threshold]


def _close_run(t, r, i0, i1, station_id, satellite_id) -> EventSegment:
    k = i0 + int(np.argmax(r[i0 : i1 + 1]))
    return EventSegment(
        station_id=station_id,
        satellite_id=satellite_id,
        start_s=int(t[i0]),
        end_s=int(t[i1]),
        peak_roti=float(r[k]),
        peak_time_s=int(t[k]),
    )


def _overlap_fraction(seg_a: EventSegment, seg_b: EventSegment) -> float:
    lo = max(seg_a.start_s, seg_b.start_s)
    hi = min(seg_a.end_s, seg_b.end_s)
    if hi < lo:
        return 0.0
    return ((hi - lo) // MODEL_CADENCE_S + 1) / seg_a.n_epochs


def cross_validate(
    segs_a: list[EventSegment],
    segs_b: list[EventSegment],
    coverage_b: np.ndarray,
    overlap_min: float = OVERLAP_MIN_FRACTION,
    coverage_min: float = COVERAGE_MIN_FRACTION,
) -> dict[int, int]:
    """Label every epoch of station A's segments against station B.

    ``coverage_b`` holds the epochs at which B has valid data. A segment is
    confirmed when some B segment overlaps it by at least ``overlap_min`` of
    the A segment's epochs; unverified when B covers fewer than
    ``coverage_min`` of those epochs; invalid otherwise (B was watching and
    stayed quiet).
    """
    cov = set(np.asarray(coverage_b, dtype=np.int64).tolist())
    out: dict[int, int] = {}
    for seg in segs_a:
        best = max((_overlap_fraction(seg, sb) for sb in segs_b), default=0.0)
        if best >= overlap_min:
            label = LABEL_CONFIRMED
        else:
            epochs = seg.epochs()
            frac_cov = sum(1 for e in epochs.tolist() if e in cov) / len(epochs)
            label = LABEL_UNVERIFIED if frac_cov < coverage_min else LABEL_INVALID
        for e in seg.epochs().tolist():
            out[e] = label
    return out


def label_table(
    features: pd.DataFrame,
    quiet_baseline: float = QUIET_BASELINE,
    peak_threshold: float = PEAK_THRESHOLD,
) -> pd.DataFrame:
    """Four-way labels for every (t_s, station, sat) with data.

    ``features`` is the 5-minute feature table (t_s, station, sat, roti, ...)
    of the zero-baseline pair; exactly two stations are expected.
    """
    stations = sorted(features["station"].unique())
    if len(stations) > 2:
        raise ValueError(f"expected a station pair, got {stations}")
    rows = []
    for sat, sat_grp in features.groupby("sat", sort=True):
        per_station = {
            station: grp.sort_values("t_s") for station, grp in sat_grp.groupby("station")
        }
        segs = {
            station: detect_segments(
                grp["t_s"].to_numpy(),
                grp["roti"].to_numpy(),
                station,
                str(sat),
                quiet_baseline,
                peak_threshold,
            )
            for station, grp in per_station.items()
        }
        for station, grp in per_station.items():
            others = [s for s in per_station if s != station]
            other_cov = (
                per_station[others[0]]["t_s"].to_numpy() if others else np.empty(0, dtype=np.int64)
            )
            other_segs = segs[others[0]] if others else []
            seg_labels = cross_validate(segs[station], other_segs, other_cov)
            t = grp["t_s"].to_numpy(dtype=np.int64)
            lab = np.fromiter(
                (seg_labels.get(int(e), LABEL_QUIET) for e in t), dtype=np.int8, count=len(t)
            )
            rows.append(pd.DataFrame({"t_s": t, "station": station, "sat": str(sat), "label": lab}))
    if not rows:
        return pd.DataFrame(columns=LABEL_COLUMNS)
    out = pd.concat(rows, ignore_index=True)
    return out.sort_values(["t_s", "station", "sat"], ignore_index=True)


def split_timesteps(
    all_t_s: np.ndarray,
    labels: pd.DataFrame,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    gap_steps: int = 24,
) -> dict[str, np.ndarray]:
    """Chronological train/val/test timestep sets with gaps and noise filtering.

    The last ``gap_steps`` timesteps of the train and val regions are removed
    to create 2-hour buffers. Train and val additionally drop timesteps whose
    only non-quiet labels are ambiguous (unverified/invalid with no confirmed
    event on any satellite); test is left unfiltered.
    """
    t = np.asarray(sorted(set(np.asarray(all_t_s, dtype=np.int64).tolist())), dtype=np.int64)
    m = len(t)
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    a = int(round(ratios[0] * m))
    b = int(round((ratios[0] + ratios[1]) * m))
    if not (0 < a - gap_steps and a < b - gap_steps and b < m):
        raise ValueError("split boundaries overlap after gap removal")

    regions = {
        "train": t[: a - gap_steps],
        "val": t[a : b - gap_steps],
        "test": t[b:],
    }

    amb = _ambiguous_only_timesteps(labels)
    out = {}
    for name, ts in regions.items():
        if name == "test":
            out[name] = ts
        else:
            out[name] = ts[~np.isin(ts, amb)]
    return out


def _ambiguous_only_timesteps(labels: pd.DataFrame) -> np.ndarray:
    """Timesteps having ambiguous labels but no confirmed event."""
    if len(labels) == 0:
        return np.empty(0, dtype=np.int64)
    grp = labels.groupby("t_s")["label"]
    has_amb = grp.apply(lambda s: bool(((s == LABEL_UNVERIFIED) | (s == LABEL_INVALID)).any()))
    has_conf = grp.apply(lambda s: bool((s == LABEL_CONFIRMED).any()))
    ts = has_amb.index.to_numpy(dtype=np.int64)
    return ts[has_amb.to_numpy() & ~has_conf.to_numpy()]


def label_statistics(labels: pd.DataFrame, splits: dict[str, np.ndarray]) -> pd.DataFrame:
    """Per-split label counts in the layout of the dataset-statistics table."""
    rows = []
    for name in ["train", "val", "test"]:
        ts = splits.get(name, np.empty(0, dtype=np.int64))
        sub = labels[labels["t_s"].isin(ts)]
        n = len(sub)
        counts = {
            "event": int((sub["label"] == LABEL_CONFIRMED).sum()),
            "quiet": int((sub["label"] == LABEL_QUIET).sum()),
            "unverified": int((sub["label"] == LABEL_UNVERIFIED).sum()),
            "invalid": int((sub["label"] == LABEL_INVALID).sum()),
        }
        row = {"split": name, "timesteps": len(ts), "nodes": n}
        for k, v in counts.items():
            row[k] = v
            row[f"{k}_pct"] = round(100.0 * v / n, 2) if n else 0.0
        rows.append(row)
    total = {
        "split": "total",
        "timesteps": sum(r["timesteps"] for r in rows),
        "nodes": sum(r["nodes"] for r in rows),
    }
    for k in ["event", "quiet", "unverified", "invalid"]:
        total[k] = sum(r[k] for r in rows)
        total[f"{k}_pct"] = round(100.0 * total[k] / total["nodes"], 2) if total["nodes"] else 0.0
    rows.append(total)
    return pd.DataFrame(rows)
