"""Zone targets: per-segment median azimuths, bin vectors and zone labels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_EDGES = (-100.0, -60.0, -30.0, 0.0, 30.0, 60.0, 100.0)

PRESETS = {
    "3": (-100.0, -30.0, 30.0, 100.0),
    "6": DEFAULT_EDGES,
    "8": (-100.0, -75.0, -50.0, -25.0, 0.0, 25.0, 50.0, 75.0, 100.0),
}

VAD_THRESHOLD_SECONDS = 8.0


@dataclass(frozen=True)
class BinConfig:
    """Azimuth bins in ascending order: index 0 is the rightmost zone.

    Bins are half-open ``[l_i, r_i)`` except the last, which is closed.
    """

    edges: tuple = DEFAULT_EDGES

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be strictly increasing with at least two entries")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def preset(cls, name) -> "BinConfig":
        try:
            return cls(PRESETS[str(name)])
        except KeyError:
            raise ValueError(f"unknown bin preset {name!r}; expected one of {sorted(PRESETS)}") from None

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @property
    def centers(self) -> np.ndarray:
        e = np.asarray(self.edges)
        return (e[:-1] + e[1:]) / 2

    def labels(self):
        return [f"[{self.edges[i]:g}, {self.edges[i + 1]:g}]" for i in range(self.n_bins)]


def median_azimuth(azimuths) -> float:
    """Lower median of an azimuth sequence."""
    a = np.sort(np.asarray(azimuths, dtype=np.float64).ravel())
    if a.size == 0:
        raise ValueError("median of an empty sequence")
    return float(a[(a.size - 1) // 2])


def bin_index(theta: float, config: BinConfig) -> int:
    """Index of the bin holding ``theta`` or -1 when outside the field."""
    edges = config.edges
    if not np.isfinite(theta):
        raise ValueError("azimuth must be finite")
    if theta < edges[0] or theta > edges[-1]:
        return -1
    if theta == edges[-1]:
        return config.n_bins - 1
    return int(np.searchsorted(edges, theta, side="right") - 1)


def bin_vector(theta: float, config: BinConfig = BinConfig()) -> np.ndarray:
    bits = np.zeros(config.n_bins, dtype=bool)
    i = bin_index(theta, config)
    if i >= 0:
        bits[i] = True
    return bits


def zone_label(per_speaker: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise OR of per-speaker bin vectors."""
    vectors = [np.asarray(b, dtype=bool) for b in per_speaker]
    if not vectors:
        raise ValueError("need at least one bin vector")
    if len({v.shape for v in vectors}) != 1:
        raise ValueError("bin vectors must have equal lengths")
    return np.logical_or.reduce(vectors)


def segment_zone_label(partner_az: np.ndarray, config: BinConfig = BinConfig()) -> np.ndarray:
    """Zone label of a segment from per-partner azimuth tracks ``(P, T)``."""
    return zone_label([bin_vector(median_azimuth(track), config) for track in np.atleast_2d(partner_az)])


def shape_target_count(partner_vads, threshold: float = VAD_THRESHOLD_SECONDS, frame_rate: float = 5.0) -> int:
    """Number of partners whose cumulative voice activity reaches ``threshold`` seconds."""
    vads = np.atleast_2d(np.asarray(partner_vads, dtype=bool))
    seconds = vads.sum(axis=1) / frame_rate
    return int(np.sum(seconds >= threshold - 1e-9))


def class_weights(labels) -> np.ndarray:
    """Inverse normalized positive frequency per bin.

    Bins without any positive sample get the largest weight among the
    observed bins.
    """
    y = np.asarray(labels, dtype=bool)
    if y.ndim != 2 or y.shape[0] == 0:
        raise ValueError("need a non-empty (N, n_bins) label array")
    f = y.sum(axis=0).astype(np.float64)
    total = f.sum()
    if total == 0:
        return np.ones(y.shape[1])
    observed = f > 0
    k = np.empty_like(f)
    k[observed] = total / f[observed]
    k[~observed] = k[observed].max()
    return k
