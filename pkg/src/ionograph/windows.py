"""Training samples: history + forecast windows over a unified node index.

A sample anchored at timestep t collects the 24 observed snapshots
t-23 .. t (history) and the 24 ephemeris snapshots t+1 .. t+24 (forecast).
Every identity (station, satellite) appearing anywhere in those 48 steps
gets one slot in the sample's unified index; per-step features, labels and
edge lists are written into that fixed indexing. Positions with no node at
a step hold zeros and are masked out.

Masks (all {0,1}):
    m_hist[t, v]   node v observed at history step t
    m_pred[t, v]   node v in the ephemeris graph at forecast step t
    m_valid[t, v]  m_pred and the QC label is confirmed/quiet
    m_new[t, v]    m_pred and v absent from the entire history window
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .graphs import (
    GraphSnapshot,
    LABEL_NONE,
    N_EPH_FEATURES,
    N_OBS_FEATURES,
    NormStats,
    SnapshotStream,
    apply_norm,
)
from .qc import LABEL_CONFIRMED, LABEL_QUIET
from .timebase import MODEL_CADENCE_S

T_IN = 24
T_OUT = 24

N_NODE_FEATURES = N_OBS_FEATURES + N_EPH_FEATURES  # history encoder input width

EdgeList = tuple[np.ndarray, np.ndarray, np.ndarray]  # (src, dst, feats)


@dataclass
class Sample:
    """One forecasting sample over the unified node index."""

    t0_s: int
    identities: list[tuple[str, str]]
    hist_x: np.ndarray  # [T_in, N, 14] normalized x_obs || x_eph, zeros at absent
    hist_labels: np.ndarray  # [T_in, N] int8, LABEL_NONE at absent
    m_hist: np.ndarray  # [T_in, N] float
    hist_edges: list[EdgeList]  # per history step, unified indices
    pred_eph: np.ndarray  # [T_out, N, 9] normalized x_eph
    pred_labels: np.ndarray  # [T_out, N] int8
    m_pred: np.ndarray  # [T_out, N]
    m_valid: np.ndarray
    m_new: np.ndarray
    pred_edges: list[EdgeList]
    hist_presence: np.ndarray  # [N] bool, pre-dropout history-graph membership
    dropped: np.ndarray = field(default=None)  # [N] bool, set by simulate_dropout

    def __post_init__(self):
        if self.dropped is None:
            self.dropped = np.zeros(len(self.identities), dtype=bool)

    @property
    def n_nodes(self) -> int:
        return len(self.identities)


@dataclass
class Batch:
    """Samples padded to a common node count; edges offset by b * n_max."""

    t0_s: np.ndarray  # [B]
    n_nodes: np.ndarray  # [B] true node counts before padding
    identities: list[list[tuple[str, str]]]
    hist_x: np.ndarray  # [B, T_in, N_max, 14]
    hist_labels: np.ndarray
    m_hist: np.ndarray
    hist_edges: list[EdgeList]  # per history step, batched+offset
    pred_eph: np.ndarray
    pred_labels: np.ndarray
    m_pred: np.ndarray
    m_valid: np.ndarray
    m_new: np.ndarray
    pred_edges: list[EdgeList]
    hist_presence: np.ndarray  # [B, N_max]
    dropped: np.ndarray  # [B, N_max]

    @property
    def n_samples(self) -> int:
        return len(self.t0_s)

    @property
    def n_max(self) -> int:
        return self.hist_x.shape[2]


def build_sample(
    stream: SnapshotStream,
    stats: NormStats,
    anchor_index: int,
    t_in: int = T_IN,
    t_out: int = T_OUT,
) -> Sample:
    """Assemble the sample whose last history step is ``stream.t_s[anchor_index]``."""
    i0, i1 = anchor_index - t_in + 1, anchor_index + t_out
    if i0 < 0 or i1 >= len(stream):
        raise ValueError(f"anchor {anchor_index} leaves the stream bounds")
    hist_snaps = stream.obs[i0 : anchor_index + 1]
    pred_snaps = stream.eph[anchor_index + 1 : i1 + 1]
    times = [s.t_s for s in hist_snaps] + [s.t_s for s in pred_snaps]
    if list(np.diff(times)) != [MODEL_CADENCE_S] * (t_in + t_out - 1):
        raise ValueError("snapshots are not consecutive at model cadence")

    ids = sorted({i for s in hist_snaps + pred_snaps for i in s.identities()})
    index = {ident: k for k, ident in enumerate(ids)}
    n = len(ids)

    hist_x = np.zeros((t_in, n, N_NODE_FEATURES))
    hist_labels = np.full((t_in, n), LABEL_NONE, dtype=np.int8)
    m_hist = np.zeros((t_in, n))
    hist_edges = []
    for t, snap in enumerate(hist_snaps):
        loc = _locate(snap, index)
        if len(loc):
            hist_x[t, loc, :N_OBS_FEATURES] = apply_norm(snap.x_obs, stats.obs_min, stats.obs_max)
            hist_x[t, loc, N_OBS_FEATURES:] = apply_norm(snap.x_eph, stats.eph_min, stats.eph_max)
            hist_labels[t, loc] = snap.labels
            m_hist[t, loc] = 1.0
        hist_edges.append(_remap_edges(snap, loc, stats))

    pred_eph = np.zeros((t_out, n, N_EPH_FEATURES))
    pred_labels = np.full((t_out, n), LABEL_NONE, dtype=np.int8)
    m_pred = np.zeros((t_out, n))
    pred_edges = []
    for t, snap in enumerate(pred_snaps):
        loc = _locate(snap, index)
        if len(loc):
            pred_eph[t, loc] = apply_norm(snap.x_eph, stats.eph_min, stats.eph_max)
            pred_labels[t, loc] = snap.labels
            m_pred[t, loc] = 1.0
        pred_edges.append(_remap_edges(snap, loc, stats))

    hist_presence = m_hist.sum(axis=0) > 0
    m_valid = m_pred * np.isin(pred_labels, [LABEL_CONFIRMED, LABEL_QUIET]).astype(float)
    m_new = m_pred * (~hist_presence).astype(float)[None, :]

    return Sample(
        t0_s=int(stream.t_s[anchor_index]),
        identities=ids,
        hist_x=hist_x,
        hist_labels=hist_labels,
        m_hist=m_hist,
        hist_edges=hist_edges,
        pred_eph=pred_eph,
        pred_labels=pred_labels,
        m_pred=m_pred,
        m_valid=m_valid,
        m_new=m_new,
        pred_edges=pred_edges,
        hist_presence=hist_presence,
    )


def _locate(snap: GraphSnapshot, index: dict) -> np.ndarray:
    return np.array([index[i] for i in snap.identities()], dtype=np.int64)


def _remap_edges(snap: GraphSnapshot, loc: np.ndarray, stats: NormStats) -> EdgeList:
    if len(snap.edge_src) == 0:
        return (
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty((0, snap.edge_feats.shape[1] if snap.edge_feats.ndim == 2 else 7)),
        )
    feats = apply_norm(snap.edge_feats, stats.edge_min, stats.edge_max)
    return loc[snap.edge_src], loc[snap.edge_dst], feats


def collate(samples: list[Sample]) -> Batch:
    """Stack samples with zero padding to N_max; edge indices offset by b*N_max."""
    if not samples:
        raise ValueError("cannot collate an empty sample list")
    b = len(samples)
    n_max = max(s.n_nodes for s in samples)
    t_in, t_out = samples[0].hist_x.shape[0], samples[0].pred_eph.shape[0]

    def pad(stack_attr, shape, dtype=float, fill=0):
        out = np.full((b, *shape), fill, dtype=dtype)
        for i, s in enumerate(samples):
            arr = getattr(s, stack_attr)
            if arr.ndim == 3:
                out[i, :, : s.n_nodes, :] = arr
            elif arr.ndim == 2:
                out[i, :, : s.n_nodes] = arr
            else:
                out[i, : s.n_nodes] = arr
        return out

    batch = Batch(
        t0_s=np.array([s.t0_s for s in samples], dtype=np.int64),
        n_nodes=np.array([s.n_nodes for s in samples], dtype=np.int64),
        identities=[s.identities for s in samples],
        hist_x=pad("hist_x", (t_in, n_max, N_NODE_FEATURES)),
        hist_labels=pad("hist_labels", (t_in, n_max), dtype=np.int8, fill=LABEL_NONE),
        m_hist=pad("m_hist", (t_in, n_max)),
        hist_edges=[
            _merge_edges([s.hist_edges[t] for s in samples], n_max) for t in range(t_in)
        ],
        pred_eph=pad("pred_eph", (t_out, n_max, N_EPH_FEATURES)),
        pred_labels=pad("pred_labels", (t_out, n_max), dtype=np.int8, fill=LABEL_NONE),
        m_pred=pad("m_pred", (t_out, n_max)),
        m_valid=pad("m_valid", (t_out, n_max)),
        m_new=pad("m_new", (t_out, n_max)),
        pred_edges=[
            _merge_edges([s.pred_edges[t] for s in samples], n_max) for t in range(t_out)
        ],
        hist_presence=pad("hist_presence", (n_max,), dtype=bool, fill=False),
        dropped=pad("dropped", (n_max,), dtype=bool, fill=False),
    )
    return batch


def _merge_edges(edge_lists: list[EdgeList], n_max: int) -> EdgeList:
    srcs, dsts, feats = [], [], []
    for b, (s, d, f) in enumerate(edge_lists):
        srcs.append(s + b * n_max)
        dsts.append(d + b * n_max)
        feats.append(f)
    return (
        np.concatenate(srcs) if srcs else np.empty(0, dtype=np.int64),
        np.concatenate(dsts) if dsts else np.empty(0, dtype=np.int64),
        np.concatenate(feats, axis=0) if feats else np.empty((0, 7)),
    )


def uncollate(batch: Batch, i: int) -> Sample:
    """Recover sample ``i`` from a batch (exact round trip of :func:`collate`)."""
    n = int(batch.n_nodes[i])
    n_max = batch.n_max

    def strip_edges(lists):
        out = []
        for s, d, f in lists:
            sel = (s >= i * n_max) & (s < (i + 1) * n_max)
            out.append((s[sel] - i * n_max, d[sel] - i * n_max, f[sel]))
        return out

    return Sample(
        t0_s=int(batch.t0_s[i]),
        identities=batch.identities[i],
        hist_x=batch.hist_x[i, :, :n, :].copy(),
        hist_labels=batch.hist_labels[i, :, :n].copy(),
        m_hist=batch.m_hist[i, :, :n].copy(),
        hist_edges=strip_edges(batch.hist_edges),
        pred_eph=batch.pred_eph[i, :, :n, :].copy(),
        pred_labels=batch.pred_labels[i, :, :n].copy(),
        m_pred=batch.m_pred[i, :, :n].copy(),
        m_valid=batch.m_valid[i, :, :n].copy(),
        m_new=batch.m_new[i, :, :n].copy(),
        pred_edges=strip_edges(batch.pred_edges),
        hist_presence=batch.hist_presence[i, :n].copy(),
        dropped=batch.dropped[i, :n].copy(),
    )


def simulate_dropout(
    sample: Sample,
    fraction: float | None = None,
    stations: set[str] | None = None,
    seed: int = 0,
) -> Sample:
    """Simulated coverage loss: zero x_obs and clear m_hist for chosen nodes.

    Graph structure, x_eph, labels and all forecast-side masks stay intact.
    Either a node fraction (seeded uniform choice among history-present
    nodes) or an explicit station set selects the victims.
    """
    if fraction is not None and not 0.0 <= fraction <= 1.0:
        raise ValueError("dropout fraction must lie in [0, 1]")
    eligible = np.flatnonzero(sample.hist_presence)
    if stations is not None:
        chosen = np.array(
            [v for v in eligible if sample.identities[v][0] in stations], dtype=np.int64
        )
    else:
        k = int(round(fraction * len(eligible)))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, sample.t0_s))))
        chosen = np.sort(rng.choice(eligible, size=k, replace=False)) if k else np.empty(0, dtype=np.int64)

    out = replace(
        sample,
        hist_x=sample.hist_x.copy(),
        m_hist=sample.m_hist.copy(),
        dropped=sample.dropped.copy(),
    )
    if len(chosen):
        out.hist_x[:, chosen, :N_OBS_FEATURES] = 0.0
        out.m_hist[:, chosen] = 0.0
        out.dropped[chosen] = True
    return out


def eligible_anchors(
    stream_t_s: np.ndarray,
    allowed_t_s: np.ndarray,
    t_in: int = T_IN,
    t_out: int = T_OUT,
    stride: int = 1,
) -> np.ndarray:
    """Anchor indices whose full 48-step window lies inside ``allowed_t_s``."""
    allowed = np.isin(stream_t_s, allowed_t_s)
    ok = np.ones(len(stream_t_s), dtype=bool)
    # window covers indices [i - t_in + 1, i + t_out]
    csum = np.cumsum(np.concatenate([[0], allowed.astype(np.int64)]))
    idx = np.arange(len(stream_t_s))
    lo = idx - t_in + 1
    hi = idx + t_out
    ok = (lo >= 0) & (hi < len(stream_t_s))
    window = np.zeros(len(stream_t_s), dtype=np.int64)
    window[ok] = csum[hi[ok] + 1] - csum[lo[ok]]
    ok &= window == (t_in + t_out)
    anchors = idx[ok]
    return anchors[::stride]
