"""Rule-based localization and counting from head-orientation clusters."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .targets import BinConfig, bin_vector, shape_target_count

NOISE = -1
UNVISITED = -2


def min_pts_for(threshold_seconds: float, frame_rate: float = 5.0) -> int:
    """Cluster size matching a voice-activity time threshold (2 s at 5 Hz -> 10)."""
    return max(1, int(round(threshold_seconds * frame_rate)))


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 8.0  # degrees in (az, el) space
    min_pts: int = 10

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")


@dataclass
class ClusterResult:
    labels: np.ndarray  # -1 = noise, clusters numbered 0.. in discovery order
    centroids: np.ndarray  # (n_clusters, 2)

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]


def dbscan(points, params: DbscanParams = DbscanParams()) -> ClusterResult:
    """Classic DBSCAN over Euclidean distance; ``min_pts`` counts the point itself.

    Points are scanned in input order, so a border point reachable from two
    clusters joins the one discovered first.
    """
    X = np.asarray(points, dtype=np.float64).reshape(-1, 2) if len(points) else np.zeros((0, 2))
    n = X.shape[0]
    labels = np.full(n, UNVISITED, dtype=int)
    if n == 0:
        return ClusterResult(labels, np.zeros((0, 2)))
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    neighbors = [np.flatnonzero(row <= params.eps**2) for row in d2]
    core = np.array([nb.size >= params.min_pts for nb in neighbors])
    cluster = 0
    for i in range(n):
        if labels[i] != UNVISITED:
            continue
        if not core[i]:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = list(neighbors[i])
        head = 0
        while head < len(queue):
            j = queue[head]
            head += 1
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            if core[j]:
                queue.extend(neighbors[j])
        cluster += 1
    centroids = np.array([X[labels == c].mean(axis=0) for c in range(cluster)]).reshape(-1, 2)
    return ClusterResult(labels, centroids)


def _listening_points(az, el, self_vad) -> np.ndarray:
    keep = ~np.asarray(self_vad, dtype=bool)
    return np.column_stack([np.asarray(az)[keep], np.asarray(el)[keep]])


def rule_localize(az, el, self_vad, config: BinConfig = BinConfig(),
                  params: DbscanParams = DbscanParams()) -> np.ndarray:
    """Zones of the head-orientation clusters formed while the focal user listens."""
    result = dbscan(_listening_points(az, el, self_vad), params)
    label = np.zeros(config.n_bins, dtype=bool)
    for c_az, _ in result.centroids:
        label |= bin_vector(c_az, config)
    return label


def rule_count(az, el, self_vad, params: DbscanParams = DbscanParams(), max_count: int = 4) -> int:
    result = dbscan(_listening_points(az, el, self_vad), params)
    return min(result.n_clusters, max_count)


def sweep_vad_threshold(segments: Sequence, thresholds: Iterable[float], eps: float = 8.0,
                        frame_rate: float = 5.0) -> List[dict]:
    """Agreement between cluster counts and talkativeness-shaped counts per threshold.

    For each threshold ``t`` the clusters need ``min_pts_for(t)`` listening
    frames and the reference is the number of partners talking at least
    ``t`` seconds. Returns one row per threshold with accuracy and MAE.
    """
    rows = []
    for t in thresholds:
        params = DbscanParams(eps=eps, min_pts=min_pts_for(t, frame_rate))
        pred, ref = [], []
        for seg in segments:
            pred.append(rule_count(seg.az, seg.el, seg.self_vad, params))
            ref.append(shape_target_count(seg.vad, t, frame_rate))
        pred, ref = np.array(pred), np.array(ref)
        rows.append({
            "threshold": float(t),
            "min_pts": params.min_pts,
            "accuracy": float(np.mean(pred == ref)) if len(ref) else float("nan"),
            "mae": float(np.mean(np.abs(pred - ref))) if len(ref) else float("nan"),
            "n_segments": int(len(ref)),
        })
    return rows
