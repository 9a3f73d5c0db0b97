"""Per-timestep observation graphs: nodes at pierce points, K-NN edges.

Every 5-minute timestep yields two snapshots over the same unified geometry:

* an *observed* snapshot whose nodes are links with a valid 5-minute feature
  row (these carry ``x_obs`` and feed the history window), and
* an *ephemeris* snapshot whose nodes are all links above the elevation mask
  according to orbit propagation alone (these carry only ``x_eph`` and feed
  the forecast window).

Edges run from each node's K nearest neighbors (haversine distance on the
ionospheric shell) into the node; ties break on node order. Self-pairs are
never stored; the attention layer adds its own self-term.

Feature layouts (all min-max normalized downstream from training-split
statistics kept in a ``NormStats`` sidecar):

    x_obs  = [roti, dtec_rate, eff_snr, dst, f107]
    x_eph  = [ipp_lat, ipp_lon, mag_lat, mag_lon, elevation,
              sin_doy, cos_doy, sin_lst, cos_lst]
    edge   = [shell_distance_km, d_lat, d_lon, d_mag_lat, d_mag_lon,
              lst_sep_deg, zero_baseline_flag]
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .ephemeris import LosLink, Station, OrbitElements, visible_links
from .geo import EARTH_RADIUS_KM, SHELL_HEIGHT_KM, MagneticPole, DEFAULT_POLE
from .timebase import MODEL_CADENCE_S, day_of_year_frac

K_NEIGHBORS = 4
SHELL_RADIUS_KM = EARTH_RADIUS_KM + SHELL_HEIGHT_KM

N_OBS_FEATURES = 5
N_EPH_FEATURES = 9
N_EDGE_FEATURES = 7
ZB_FLAG_INDEX = 6  # zero-baseline flag column in the edge features

LABEL_NONE = -9  # node exists in the ephemeris graph but has no QC label

OBS_FEATURE_NAMES = ["roti", "dtec_rate", "eff_snr", "dst", "f107"]
EPH_FEATURE_NAMES = [
    "ipp_lat",
    "ipp_lon",
    "mag_lat",
    "mag_lon",
    "elevation",
    "sin_doy",
    "cos_doy",
    "sin_lst",
    "cos_lst",
]
EDGE_FEATURE_NAMES = [
    "shell_distance_km",
    "d_lat",
    "d_lon",
    "d_mag_lat",
    "d_mag_lon",
    "lst_sep_deg",
    "zero_baseline_flag",
]


@dataclass
class GraphSnapshot:
    """Nodes, directed K-NN edges and features for one timestep."""

    t_s: int
    station_ids: np.ndarray  # [N] str
    sat_ids: np.ndarray  # [N] str
    x_eph: np.ndarray  # [N, 9]
    x_obs: np.ndarray | None  # [N, 5] on observed snapshots, None on ephemeris ones
    labels: np.ndarray  # [N] int8, LABEL_NONE where unlabeled
    edge_src: np.ndarray  # [E] int32, source node index
    edge_dst: np.ndarray  # [E] int32, target node index
    edge_feats: np.ndarray  # [E, 7]

    @property
    def n_nodes(self) -> int:
        return len(self.sat_ids)

    def identities(self) -> list[tuple[str, str]]:
        return list(zip(self.station_ids.tolist(), self.sat_ids.tolist()))


def eph_features_from_link(link: LosLink, epoch_s: int) -> np.ndarray:
    doy = day_of_year_frac(epoch_s)
    sin_d, cos_d = math.sin(2 * math.pi * doy / 365.25), math.cos(2 * math.pi * doy / 365.25)
    sin_l = math.sin(2 * math.pi * link.local_solar_time_h / 24.0)
    cos_l = math.cos(2 * math.pi * link.local_solar_time_h / 24.0)
    return np.array(
        [
            link.ipp.lat_deg,
            link.ipp.lon_deg,
            link.mag_lat_deg,
            link.mag_lon_deg,
            link.elevation_deg,
            sin_d,
            cos_d,
            sin_l,
            cos_l,
        ]
    )


def edge_feature_vector(src: LosLink, dst: LosLink) -> np.ndarray:
    """Features of a directed edge src -> dst; deltas are source minus target."""
    dist = SHELL_RADIUS_KM * math.radians(
        _central_angle_deg(src.ipp.lat_deg, src.ipp.lon_deg, dst.ipp.lat_deg, dst.ipp.lon_deg)
    )
    d_lon = _wrap_deg(src.ipp.lon_deg - dst.ipp.lon_deg)
    d_mag_lon = _wrap_deg(src.mag_lon_deg - dst.mag_lon_deg)
    lst_d = abs(src.local_solar_time_h - dst.local_solar_time_h) % 24.0
    lst_sep = min(lst_d, 24.0 - lst_d) * 15.0
    flag = 1.0 if src.satellite_id == dst.satellite_id and src.station_id != dst.station_id else 0.0
    return np.array(
        [
            dist,
            src.ipp.lat_deg - dst.ipp.lat_deg,
            d_lon,
            src.mag_lat_deg - dst.mag_lat_deg,
            d_mag_lon,
            lst_sep,
            flag,
        ]
    )


def _wrap_deg(d: float) -> float:
    return (d + 180.0) % 360.0 - 180.0


def _central_angle_deg(lat1, lon1, lat2, lon2) -> float:
    la, lb = math.radians(lat1), math.radians(lat2)
    dlat, dlon = lb - la, math.radians(lon2 - lon1)
    s = math.sin(dlat / 2) ** 2 + math.cos(la) * math.cos(lb) * math.sin(dlon / 2) ** 2
    return math.degrees(2.0 * math.asin(min(1.0, math.sqrt(s))))


def knn_edges(links: list[LosLink], k: int = K_NEIGHBORS):
    """Directed K-NN edge lists (src, dst, feats) over one snapshot's links.

    The K nearest other nodes send edges into each node; ties break on node
    index, so a permuted input yields the isomorphic edge set.
    """
    n = len(links)
    if n <= 1:
        return (
            np.empty(0, dtype=np.int32),
            np.empty(0, dtype=np.int32),
            np.empty((0, N_EDGE_FEATURES)),
        )
    lat = np.array([l.ipp.lat_deg for l in links])
    lon = np.array([l.ipp.lon_deg for l in links])
    la = np.radians(lat)[:, None]
    lb = np.radians(lat)[None, :]
    dlat = lb - la
    dlon = np.radians(lon[None, :] - lon[:, None])
    s = np.sin(dlat / 2) ** 2 + np.cos(la) * np.cos(lb) * np.sin(dlon / 2) ** 2
    dist = 2.0 * np.arcsin(np.minimum(1.0, np.sqrt(s)))  # [i, j] central angle
    np.fill_diagonal(dist, np.inf)

    kk = min(k, n - 1)
    src_list, dst_list, feat_list = [], [], []
    for i in range(n):
        order = np.argsort(dist[i], kind="stable")[:kk]
        for j in order:
            src_list.append(j)
            dst_list.append(i)
            feat_list.append(edge_feature_vector(links[j], links[i]))
    return (
        np.asarray(src_list, dtype=np.int32),
        np.asarray(dst_list, dtype=np.int32),
        np.vstack(feat_list),
    )


def build_snapshot(
    links: list[LosLink],
    epoch_s: int,
    k: int = K_NEIGHBORS,
    obs_rows: dict[tuple[str, str], tuple[float, float, float]] | None = None,
    labels: dict[tuple[str, str], int] | None = None,
    dst_index: float = 0.0,
    f107_index: float = 0.0,
) -> GraphSnapshot:
    """Snapshot over the given links, sorted by (station, satellite).

    With ``obs_rows`` set, only links having an observation row become nodes
    and ``x_obs`` is filled; otherwise all links become ephemeris nodes with
    ``x_obs=None``.
    """
    links = sorted(links, key=lambda l: (l.station_id, l.satellite_id))
    if obs_rows is not None:
        links = [l for l in links if (l.station_id, l.satellite_id) in obs_rows]
    labels = labels or {}

    x_eph = (
        np.vstack([eph_features_from_link(l, epoch_s) for l in links])
        if links
        else np.empty((0, N_EPH_FEATURES))
    )
    x_obs = None
    if obs_rows is not None:
        x_obs = np.empty((len(links), N_OBS_FEATURES))
        for i, l in enumerate(links):
            roti, dtec, snr = obs_rows[(l.station_id, l.satellite_id)]
            x_obs[i] = [roti, dtec, snr, dst_index, f107_index]

    lab = np.array(
        [labels.get((l.station_id, l.satellite_id), LABEL_NONE) for l in links], dtype=np.int8
    )
    src, dstn, feats = knn_edges(links, k)
    return GraphSnapshot(
        t_s=epoch_s,
        station_ids=np.array([l.station_id for l in links], dtype="U16"),
        sat_ids=np.array([l.satellite_id for l in links], dtype="U16"),
        x_eph=x_eph,
        x_obs=x_obs,
        labels=lab,
        edge_src=src,
        edge_dst=dstn,
        edge_feats=feats,
    )


@dataclass
class NormStats:
    """Per-feature min/max fitted on the training split."""

    obs_min: np.ndarray
    obs_max: np.ndarray
    eph_min: np.ndarray
    eph_max: np.ndarray
    edge_min: np.ndarray
    edge_max: np.ndarray

    def save(self, path) -> None:
        payload = {
            "feature_names": {
                "x_obs": OBS_FEATURE_NAMES,
                "x_eph": EPH_FEATURE_NAMES,
                "edge": EDGE_FEATURE_NAMES,
            },
        }
        for name in ["obs", "eph", "edge"]:
            payload[name] = {
                "min": getattr(self, f"{name}_min").tolist(),
                "max": getattr(self, f"{name}_max").tolist(),
            }
        tmp = f"{path}.tmp"
        with open(tmp, "w") as f:
            json.dump(payload, f, indent=1, sort_keys=True)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "NormStats":
        with open(path) as f:
            p = json.load(f)
        return cls(
            *(
                np.asarray(p[name][side], dtype=float)
                for name in ["obs", "eph", "edge"]
                for side in ["min", "max"]
            )
        )


def fit_norm(snapshots) -> NormStats:
    """Min/max over observed snapshots (training period only)."""
    obs, eph, edge = [], [], []
    for snap in snapshots:
        if snap.x_obs is not None and len(snap.x_obs):
            obs.append(snap.x_obs)
        if len(snap.x_eph):
            eph.append(snap.x_eph)
        if len(snap.edge_feats):
            edge.append(snap.edge_feats)
    if not obs and not eph:
        raise ValueError("cannot fit normalization on an empty snapshot set")
    out = {}
    for name, rows, width in [
        ("obs", obs, N_OBS_FEATURES),
        ("eph", eph, N_EPH_FEATURES),
        ("edge", edge, N_EDGE_FEATURES),
    ]:
        if rows:
            m = np.concatenate(rows, axis=0)
            out[f"{name}_min"], out[f"{name}_max"] = m.min(axis=0), m.max(axis=0)
        else:
            out[f"{name}_min"] = np.zeros(width)
            out[f"{name}_max"] = np.zeros(width)
    return NormStats(**out)


def apply_norm(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """(x - min) / (max - min); constant features map to 0; no clamping."""
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (np.asarray(x, dtype=float) - lo) / safe, 0.0)


# ---------------------------------------------------------------------------
# snapshot stream container


@dataclass
class SnapshotStream:
    """All observed + ephemeris snapshots of a scenario, ragged over time."""

    t_s: np.ndarray  # [M]
    obs: list[GraphSnapshot] = field(repr=False, default_factory=list)
    eph: list[GraphSnapshot] = field(repr=False, default_factory=list)

    def __len__(self) -> int:
        return len(self.t_s)

    def save(self, path) -> None:
        payload = {"t_s": self.t_s}
        for name, snaps in [("obs", self.obs), ("eph", self.eph)]:
            payload[f"{name}_node_count"] = np.array([s.n_nodes for s in snaps], dtype=np.int32)
            payload[f"{name}_edge_count"] = np.array(
                [len(s.edge_src) for s in snaps], dtype=np.int32
            )
            payload[f"{name}_station"] = _cat_str([s.station_ids for s in snaps])
            payload[f"{name}_sat"] = _cat_str([s.sat_ids for s in snaps])
            payload[f"{name}_x_eph"] = _cat2d([s.x_eph for s in snaps], N_EPH_FEATURES)
            payload[f"{name}_label"] = _cat1d([s.labels for s in snaps], np.int8)
            payload[f"{name}_edge_src"] = _cat1d([s.edge_src for s in snaps], np.int32)
            payload[f"{name}_edge_dst"] = _cat1d([s.edge_dst for s in snaps], np.int32)
            payload[f"{name}_edge_feats"] = _cat2d([s.edge_feats for s in snaps], N_EDGE_FEATURES)
        payload["obs_x_obs"] = _cat2d(
            [s.x_obs if s.x_obs is not None else np.empty((0, N_OBS_FEATURES)) for s in self.obs],
            N_OBS_FEATURES,
        )
        tmp = f"{path}.tmp.npz"
        np.savez_compressed(tmp, **payload)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "SnapshotStream":
        z = np.load(path, allow_pickle=False)
        t_s = z["t_s"]
        streams = {}
        for name in ["obs", "eph"]:
            nodes = np.cumsum(np.concatenate([[0], z[f"{name}_node_count"]]))
            edges = np.cumsum(np.concatenate([[0], z[f"{name}_edge_count"]]))
            snaps = []
            for i, t in enumerate(t_s):
                n0, n1 = nodes[i], nodes[i + 1]
                e0, e1 = edges[i], edges[i + 1]
                snaps.append(
                    GraphSnapshot(
                        t_s=int(t),
                        station_ids=z[f"{name}_station"][n0:n1],
                        sat_ids=z[f"{name}_sat"][n0:n1],
                        x_eph=z[f"{name}_x_eph"][n0:n1],
                        x_obs=z["obs_x_obs"][n0:n1] if name == "obs" else None,
                        labels=z[f"{name}_label"][n0:n1],
                        edge_src=z[f"{name}_edge_src"][e0:e1],
                        edge_dst=z[f"{name}_edge_dst"][e0:e1],
                        edge_feats=z[f"{name}_edge_feats"][e0:e1],
                    )
                )
            streams[name] = snaps
        return cls(t_s=t_s, obs=streams["obs"], eph=streams["eph"])


def _cat_str(arrays):
    arrays = [a for a in arrays if len(a)]
    return np.concatenate(arrays) if arrays else np.empty(0, dtype="U16")


def _cat1d(arrays, dtype):
    arrays = [np.asarray(a, dtype=dtype) for a in arrays if len(a)]
    return np.concatenate(arrays) if arrays else np.empty(0, dtype=dtype)


def _cat2d(arrays, width):
    arrays = [np.asarray(a, dtype=float) for a in arrays if len(a)]
    return np.concatenate(arrays, axis=0) if arrays else np.empty((0, width))


def build_stream(
    features: pd.DataFrame,
    labels: pd.DataFrame,
    indices: pd.DataFrame,
    stations: list[Station],
    orbits: list[OrbitElements],
    n_steps: int,
    k: int = K_NEIGHBORS,
    pole: MagneticPole = DEFAULT_POLE,
    elevation_mask_deg: float = 30.0,
) -> SnapshotStream:
    """Observed + ephemeris snapshots for every model timestep of a scenario."""
    feat_by_t: dict[int, dict] = {}
    for row in features.itertuples(index=False):
        feat_by_t.setdefault(int(row.t_s), {})[(row.station, row.sat)] = (
            float(row.roti),
            float(row.dtec_rate),
            float(row.eff_snr),
        )
    lab_by_t: dict[int, dict] = {}
    for row in labels.itertuples(index=False):
        lab_by_t.setdefault(int(row.t_s), {})[(row.station, row.sat)] = int(row.label)

    dst_h = indices.set_index("t_s")["dst"]
    f107_h = indices.set_index("t_s")["f107"]

    t_s = np.arange(n_steps, dtype=np.int64) * MODEL_CADENCE_S
    obs_snaps, eph_snaps = [], []
    for t in t_s.tolist():
        links = visible_links(stations, orbits, t, elevation_mask_deg, pole=pole)
        hour = (t // 3600) * 3600  # forward-fill hourly indices onto the model grid
        dst_v = float(dst_h.get(hour, dst_h.iloc[-1]))
        f107_v = float(f107_h.get(hour, f107_h.iloc[-1]))
        lab = lab_by_t.get(t, {})
        eph_snaps.append(build_snapshot(links, t, k, obs_rows=None, labels=lab))
        obs_snaps.append(
            build_snapshot(
                links, t, k, obs_rows=feat_by_t.get(t, {}), labels=lab, dst_index=dst_v, f107_index=f107_v
            )
        )
    return SnapshotStream(t_s=t_s, obs=obs_snaps, eph=eph_snaps)
