"""Deterministic synthetic-ionosphere scenario generator.

Produces 30-second raw observations for a zero-baseline station pair, a
5-minute ground-truth irregularity table, and driver-index series, all from
a single seed. Irregularities are drifting disk patches that amplify the
ROT noise variance seen by every link whose pierce point falls inside; the
amplification footprint extends slightly past the ground-truth radius with
a cosine taper so threshold-based detection can trace segment edges.

Receiver-side effects are injected separately: single-station variance
bursts (fake events), SNR fades, geometry-free phase jumps and station
coverage gaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import signals
from .ephemeris import OrbitElements, Station, propagate_many, elevation_azimuth_deg
from .geo import GeoPoint, central_angle_deg, ipp_arrays, local_solar_time_h
from .timebase import MODEL_CADENCE_S, RAW_CADENCE_S

GEN_F1_HZ = 1575.42e6
GEN_F2_HZ = 1227.60e6

# Amplification footprint radius relative to the ground-truth event radius.
FOOTPRINT_SCALE = 1.4

GROUND_TRUTH_COLUMNS = ["t_s", "station", "sat", "label"]
INDEX_COLUMNS = ["t_s", "dst", "f107"]


@dataclass(frozen=True)
class IrregularityPatch:
    """A drifting disk of elevated ROT variance with soft temporal shoulders."""

    center: GeoPoint
    radius_deg: float
    peak_roti: float  # TECU/min; ROT noise sigma at the center while active
    drift_lat_deg_h: float
    drift_lon_deg_h: float
    onset_ramp_min: float
    decay_ramp_min: float
    start_s: int
    end_s: int
    depletion_tecu: float = 0.0

    def __post_init__(self):
        if self.peak_roti <= 0.3:
            raise ValueError("patch peak must exceed the 0.3 TECU/min event threshold")
        if self.radius_deg <= 0:
            raise ValueError("patch radius must be positive")

    def center_at(self, t_s) -> tuple[np.ndarray, np.ndarray]:
        dt_h = (np.asarray(t_s, dtype=float) - self.start_s) / 3600.0
        return (
            self.center.lat_deg + self.drift_lat_deg_h * dt_h,
            self.center.lon_deg + self.drift_lon_deg_h * dt_h,
        )

    def ramp(self, t_s) -> np.ndarray:
        """Temporal activity in [0, 1]: 1 inside [start, end], cosine shoulders."""
        t = np.asarray(t_s, dtype=float)
        on = self.onset_ramp_min * 60.0
        off = self.decay_ramp_min * 60.0
        r = np.zeros_like(t)
        inside = (t >= self.start_s) & (t <= self.end_s)
        r[inside] = 1.0
        pre = (t >= self.start_s - on) & (t < self.start_s)
        if on > 0:
            r[pre] = 0.5 * (1.0 + np.cos(np.pi * (self.start_s - t[pre]) / on))
        post = (t > self.end_s) & (t <= self.end_s + off)
        if off > 0:
            r[post] = 0.5 * (1.0 + np.cos(np.pi * (t[post] - self.end_s) / off))
        return r

    def taper(self, dist_deg) -> np.ndarray:
        """Spatial weight: 1 at the center, cosine to 0 at FOOTPRINT_SCALE*radius."""
        x = np.asarray(dist_deg, dtype=float) / (FOOTPRINT_SCALE * self.radius_deg)
        return np.where(x <= 1.0, np.cos(0.5 * np.pi * np.clip(x, 0.0, 1.0)), 0.0)


@dataclass
class ScenarioConfig:
    seed: int = 0
    n_steps: int = 2000  # 5-minute model steps
    stations: list[Station] = field(default_factory=lambda: default_stations())
    shells: list[tuple[str, int, float, float, int]] = field(
        default_factory=lambda: default_shells()
    )  # (tag, count, axis_km, inclination_deg, planes)
    gen_elevation_min_deg: float = 25.0
    quiet_rot_sigma: float = 0.09

    patches: list[IrregularityPatch] | None = None  # explicit list wins over spawning
    patch_rate_per_hour: float = 2.0  # spawn rate while inside the LST window
    patch_lst_window: tuple[float, float] = (19.0, 24.0)
    patch_radius_deg: tuple[float, float] = (1.8, 3.2)
    patch_peak_roti: tuple[float, float] = (0.5, 1.1)
    patch_duration_min: tuple[float, float] = (50.0, 140.0)
    patch_onset_ramp_min: tuple[float, float] = (10.0, 25.0)
    patch_decay_ramp_min: tuple[float, float] = (10.0, 25.0)
    patch_drift_lat_deg_h: tuple[float, float] = (-0.6, 0.6)
    patch_drift_lon_deg_h: tuple[float, float] = (1.5, 4.0)
    patch_depletion_tecu: tuple[float, float] = (2.0, 6.0)
    patch_spawn_box_deg: tuple[float, float] = (4.0, 5.5)  # half-extent lat, lon

    artifact_rate_per_day: float = 4.0  # single-station variance bursts, per station
    artifact_duration_min: tuple[float, float] = (15.0, 40.0)
    artifact_sigma: tuple[float, float] = (0.45, 0.8)
    snr_fade_rate_per_day: float = 6.0  # per station
    snr_fade_duration_min: tuple[float, float] = (5.0, 20.0)
    snr_fade_depth_db: tuple[float, float] = (8.0, 18.0)
    phase_jump_rate_per_day: float = 6.0  # per station
    gap_rate_per_day: float = 1.0  # station coverage outages
    gap_duration_min: tuple[float, float] = (30.0, 120.0)

    target_event_rate: float = 0.08

    @property
    def duration_s(self) -> int:
        return self.n_steps * MODEL_CADENCE_S

    def orbits(self) -> list[OrbitElements]:
        out = []
        for tag, count, axis_km, incl, planes in self.shells:
            out.extend(walker_constellation(tag, count, axis_km, incl, planes))
        return out


def default_stations() -> list[Station]:
    return [
        Station("RXA", GeoPoint(1.3500, 103.6800)),
        Station("RXB", GeoPoint(1.3535, 103.6830)),
    ]


def default_shells() -> list[tuple[str, int, float, float, int]]:
    return [
        ("G", 32, 26560.0, 55.0, 6),
        ("E", 26, 29600.0, 56.0, 6),
        ("C", 26, 27906.0, 55.0, 6),
    ]


def walker_constellation(
    tag: str, count: int, axis_km: float, inclination_deg: float, planes: int
) -> list[OrbitElements]:
    """Evenly distributed circular constellation (Walker-style phasing)."""
    per_plane = max(1, count // planes)
    orbits = []
    for i in range(count):
        plane = i % planes
        slot = i // planes
        raan = plane * (360.0 / planes)
        arg = slot * (360.0 / per_plane) + plane * (360.0 / (planes * per_plane))
        orbits.append(
            OrbitElements(axis_km, inclination_deg, raan, arg % 360.0, tag, f"{tag}{i + 1:02d}")
        )
    return orbits


def _rng(seed: int, *key) -> np.random.Generator:
    import hashlib

    ints = tuple(
        k if isinstance(k, (int, np.integer))
        else int.from_bytes(hashlib.blake2s(str(k).encode()).digest()[:4], "big")
        for k in key
    )
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, *ints))))


def spawn_patches(cfg: ScenarioConfig) -> list[IrregularityPatch]:
    """Stochastic patch list: spawns gated to the configured local-time window."""
    if cfg.patches is not None:
        return list(cfg.patches)
    rng = _rng(cfg.seed, 1)
    home = cfg.stations[0].location
    p_step = cfg.patch_rate_per_hour * MODEL_CADENCE_S / 3600.0
    lo, hi = cfg.patch_lst_window
    out = []
    for k in range(cfg.n_steps):
        t = k * MODEL_CADENCE_S
        lst = local_solar_time_h(home.lon_deg, t)
        in_window = lo <= lst <= hi if lo <= hi else (lst >= lo or lst <= hi)
        # draw once per step to keep the stream aligned regardless of gating
        u = rng.random()
        if not in_window or u >= p_step:
            continue
        dur = rng.uniform(*cfg.patch_duration_min) * 60.0
        lat = home.lat_deg + rng.uniform(-cfg.patch_spawn_box_deg[0], cfg.patch_spawn_box_deg[0])
        lon = home.lon_deg + rng.uniform(-cfg.patch_spawn_box_deg[1], cfg.patch_spawn_box_deg[1])
        out.append(
            IrregularityPatch(
                center=GeoPoint(lat, lon),
                radius_deg=rng.uniform(*cfg.patch_radius_deg),
                peak_roti=rng.uniform(*cfg.patch_peak_roti),
                drift_lat_deg_h=rng.uniform(*cfg.patch_drift_lat_deg_h),
                drift_lon_deg_h=rng.uniform(*cfg.patch_drift_lon_deg_h),
                onset_ramp_min=rng.uniform(*cfg.patch_onset_ramp_min),
                decay_ramp_min=rng.uniform(*cfg.patch_decay_ramp_min),
                start_s=t,
                end_s=int(min(t + dur, cfg.duration_s - MODEL_CADENCE_S)),
                depletion_tecu=rng.uniform(*cfg.patch_depletion_tecu),
            )
        )
    return out


def ground_truth_label(patches: list[IrregularityPatch], t_s, ipp_lat_deg, ipp_lon_deg):
    """1 where any active patch contains the pierce point (closed disk), else 0."""
    t = np.asarray(t_s, dtype=np.int64)
    lat = np.asarray(ipp_lat_deg, dtype=float)
    lon = np.asarray(ipp_lon_deg, dtype=float)
    out = np.zeros(t.shape, dtype=np.int8)
    for p in patches:
        active = (t >= p.start_s) & (t <= p.end_s)
        if not np.any(active):
            continue
        clat, clon = p.center_at(t[active])
        d = central_angle_deg(lat[active], lon[active], clat, clon)
        hit = d <= p.radius_deg
        idx = np.flatnonzero(active)[hit]
        out[idx] = 1
    return out


def _patch_sigma_sq(patches, t_s, lat, lon):
    """Summed variance contribution of all patches at the given samples."""
    add = np.zeros(len(t_s))
    dep = np.zeros(len(t_s))
    for p in patches:
        pre = p.start_s - p.onset_ramp_min * 60.0
        post = p.end_s + p.decay_ramp_min * 60.0
        near = (t_s >= pre) & (t_s <= post)
        if not np.any(near):
            continue
        clat, clon = p.center_at(t_s[near])
        d = central_angle_deg(lat[near], lon[near], clat, clon)
        w = p.taper(d) * p.ramp(t_s[near])
        add[near] += (p.peak_roti * w) ** 2
        dep[near] -= p.depletion_tecu * w
    return add, dep


@dataclass
class _Events:
    """Receiver-side injections drawn once per scenario."""

    artifacts: list[tuple[str, str, int, int, float]]  # station, sat, start, end, sigma
    fades: list[tuple[str, str, int, int, float]]  # station, sat, start, end, depth
    jumps: list[tuple[str, str, int, float]]  # station, sat, epoch, meters
    gaps: list[tuple[str, int, int]]  # station, start, end


def _draw_events(cfg: ScenarioConfig, orbits: list[OrbitElements]) -> _Events:
    rng = _rng(cfg.seed, 2)
    days = cfg.duration_s / 86400.0
    sat_ids = [o.satellite_id for o in orbits]

    # coarse visibility so injections target satellites a station can see
    t_coarse = np.arange(0, cfg.duration_s, MODEL_CADENCE_S, dtype=float)
    pos = propagate_many(orbits, t_coarse)
    visible: dict[str, np.ndarray] = {}
    for st in cfg.stations:
        el, _ = elevation_azimuth_deg(st, pos)
        visible[st.station_id] = el >= 35.0  # margin above the 30 deg mask

    def pick_visible(station_id: str, t0: int) -> str:
        row = visible[station_id][min(t0 // MODEL_CADENCE_S, len(t_coarse) - 1)]
        ids = [sat_ids[j] for j in np.flatnonzero(row)]
        return str(rng.choice(ids if ids else sat_ids))

    artifacts, fades, jumps, gaps = [], [], [], []
    for st in cfg.stations:
        sid = st.station_id
        for _ in range(rng.poisson(cfg.artifact_rate_per_day * days)):
            t0 = int(rng.integers(0, cfg.duration_s))
            dur = rng.uniform(*cfg.artifact_duration_min) * 60.0
            artifacts.append((sid, pick_visible(sid, t0), t0, int(t0 + dur), rng.uniform(*cfg.artifact_sigma)))
        for _ in range(rng.poisson(cfg.snr_fade_rate_per_day * days)):
            t0 = int(rng.integers(0, cfg.duration_s))
            dur = rng.uniform(*cfg.snr_fade_duration_min) * 60.0
            fades.append((sid, pick_visible(sid, t0), t0, int(t0 + dur), rng.uniform(*cfg.snr_fade_depth_db)))
        for _ in range(rng.poisson(cfg.phase_jump_rate_per_day * days)):
            t0 = int(rng.integers(0, cfg.duration_s))
            jumps.append((sid, pick_visible(sid, t0), t0, rng.uniform(0.5, 2.0)))
        for _ in range(rng.poisson(cfg.gap_rate_per_day * days)):
            t0 = int(rng.integers(0, cfg.duration_s))
            dur = rng.uniform(*cfg.gap_duration_min) * 60.0
            gaps.append((sid, t0, int(t0 + dur)))
    return _Events(artifacts, fades, jumps, gaps)


def generate_indices(cfg: ScenarioConfig) -> pd.DataFrame:
    """Hourly Dst and (daily, repeated hourly) F10.7 as bounded random walks."""
    rng = _rng(cfg.seed, 3)
    n_hours = int(np.ceil(cfg.duration_s / 3600.0)) + 1
    dst = np.empty(n_hours)
    dst[0] = -10.0
    for i in range(1, n_hours):
        dst[i] = np.clip(0.985 * dst[i - 1] + rng.normal(0.0, 2.5), -80.0, 20.0)
    n_days = n_hours // 24 + 1
    f107d = np.empty(n_days)
    f107d[0] = 150.0
    for i in range(1, n_days):
        f107d[i] = np.clip(f107d[i - 1] + rng.normal(0.0, 4.0), 80.0, 250.0)
    f107 = np.repeat(f107d, 24)[:n_hours]
    return pd.DataFrame(
        {"t_s": np.arange(n_hours, dtype=np.int64) * 3600, "dst": dst, "f107": f107}
    )


def generate(cfg: ScenarioConfig):
    """Full scenario: per-station raw observations, ground truth, indices.

    Returns (obs: dict[station_id, DataFrame], ground_truth, indices, patches).
    Byte-stable for a fixed config.
    """
    orbits = cfg.orbits()
    if not orbits:
        raise ValueError("scenario needs at least one satellite")
    if not cfg.stations:
        raise ValueError("scenario needs at least one station")
    patches = spawn_patches(cfg)
    events = _draw_events(cfg, orbits)
    indices = generate_indices(cfg)

    t_raw = np.arange(0, cfg.duration_s, RAW_CADENCE_S, dtype=np.int64)
    pos = propagate_many(orbits, t_raw.astype(float))  # [n_t, n_sat, 3]

    obs_frames: dict[str, pd.DataFrame] = {}
    for st in cfg.stations:
        el, az = elevation_azimuth_deg(st, pos)  # [n_t, n_sat]
        frames = []
        for j, orb in enumerate(orbits):
            frames.append(
                _link_records(cfg, patches, events, st, orb, t_raw, el[:, j], az[:, j])
            )
        df = pd.concat([f for f in frames if f is not None], ignore_index=True)
        df = df.sort_values(["t_s", "satellite_id"], ignore_index=True)
        obs_frames[st.station_id] = df

    gt = _ground_truth_table(cfg, patches, orbits)
    return obs_frames, gt, indices, patches


def _link_records(cfg, patches, events, st, orb, t_raw, el, az):
    vis = el >= cfg.gen_elevation_min_deg
    for station_id, t0, t1 in events.gaps:
        if station_id == st.station_id:
            vis &= ~((t_raw >= t0) & (t_raw <= t1))
    if not np.any(vis):
        return None
    t = t_raw[vis]
    elv, azv = el[vis], az[vis]
    lat, lon = ipp_arrays(st.location.lat_deg, st.location.lon_deg, azv, elv)

    sig_sq, dep = _patch_sigma_sq(patches, t, lat, lon)
    amp_norm = np.sqrt(sig_sq) / max(1e-9, max(cfg.patch_peak_roti))
    for station_id, sat_id, t0, t1, sigma in events.artifacts:
        if station_id == st.station_id and sat_id == orb.satellite_id:
            sig_sq += np.where((t >= t0) & (t <= t1), sigma ** 2, 0.0)

    rng = _rng(cfg.seed, 4, st.station_id, orb.satellite_id)
    rot = np.sqrt(cfg.quiet_rot_sigma ** 2 + sig_sq) * rng.standard_normal(len(t))

    # integrate ROT within visibility arcs; each arc gets its own phase bias
    arc_start = np.concatenate([[True], np.diff(t) != RAW_CADENCE_S])
    arc_id = np.cumsum(arc_start) - 1
    stec = 0.5 * rot
    stec[arc_start] = 0.0
    stec = np.concatenate([np.cumsum(s) for s in np.split(stec, np.flatnonzero(arc_start)[1:])])
    lst = (t / 3600.0 + lon / 15.0) % 24.0
    lst_from_peak = ((lst - 14.0 + 12.0) % 24.0) - 12.0
    vtec = 12.0 + 28.0 * np.exp(-lst_from_peak ** 2 / 24.0)
    stec = stec + vtec / np.sin(np.radians(elv)) + dep
    biases = _rng(cfg.seed, 5, st.station_id, orb.satellite_id).uniform(5.0, 40.0, arc_id[-1] + 1)
    stec = stec + biases[arc_id]

    snr1 = 22.0 + 26.0 * np.sin(np.radians(elv)) + rng.normal(0.0, 0.6, len(t))
    snr2 = snr1 - 2.5 + rng.normal(0.0, 0.6, len(t)) - 4.0 * np.clip(amp_norm, 0.0, 1.0)
    for station_id, sat_id, t0, t1, depth in events.fades:
        if station_id == st.station_id and sat_id == orb.satellite_id:
            in_fade = (t >= t0) & (t <= t1)
            snr1 = np.where(in_fade, snr1 - depth, snr1)
            snr2 = np.where(in_fade, snr2 - depth, snr2)

    gf = signals.gf_m_from_stec(stec, GEN_F1_HZ, GEN_F2_HZ)
    for station_id, sat_id, t0, meters in events.jumps:
        if station_id == st.station_id and sat_id == orb.satellite_id:
            gf = gf + np.where(t >= t0, meters, 0.0)
    lam1 = signals.SPEED_OF_LIGHT_M_S / GEN_F1_HZ
    lam2 = signals.SPEED_OF_LIGHT_M_S / GEN_F2_HZ
    # put the geometric range on both carriers; the GF combination removes it
    rng_m = 2.0e7 + 1.0e5 * np.sin(t / 7200.0)
    phase1 = (rng_m + gf) / lam1
    phase2 = rng_m / lam2

    return pd.DataFrame(
        {
            "t_s": t,
            "station_id": st.station_id,
            "satellite_id": orb.satellite_id,
            "phase_f1_cycles": phase1,
            "phase_f2_cycles": phase2,
            "freq_f1_hz": GEN_F1_HZ,
            "freq_f2_hz": GEN_F2_HZ,
            "snr_f1_dbhz": snr1,
            "snr_f2_dbhz": snr2,
            "elevation_deg": elv,
            "azimuth_deg": azv,
        }
    )


def _ground_truth_table(cfg, patches, orbits):
    """Per-link ground truth at model cadence for ephemeris-visible links."""
    t_model = np.arange(0, cfg.duration_s, MODEL_CADENCE_S, dtype=np.int64)
    pos = propagate_many(orbits, t_model.astype(float))
    rows = []
    for st in cfg.stations:
        el, az = elevation_azimuth_deg(st, pos)
        for j, orb in enumerate(orbits):
            vis = el[:, j] >= 30.0
            if not np.any(vis):
                continue
            t = t_model[vis]
            lat, lon = ipp_arrays(st.location.lat_deg, st.location.lon_deg, az[vis, j], el[vis, j])
            lab = ground_truth_label(patches, t, lat, lon)
            rows.append(
                pd.DataFrame(
                    {"t_s": t, "station": st.station_id, "sat": orb.satellite_id, "label": lab}
                )
            )
    gt = pd.concat(rows, ignore_index=True)
    return gt.sort_values(["t_s", "station", "sat"], ignore_index=True)
