"""Per-action nearest-neighbor search over batch source pairs.

Pairs with different actions are treated as infinitely distant, so the
index keeps one sub-index per action over the source states of that
action's transitions. Queries are exact brute force and deterministic:
ties are broken by lower transition index. Distances are normalized by
the diameter of the core-state point cloud.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dataset import Batch, State, core_states

NORMS = ("euclidean", "manhattan")


@dataclass
class MetricConfig:
    norm: str = "euclidean"
    diameter: float | None = None
    diameter_mode: str = "exact"
    probes: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.diameter_mode not in ("exact", "sampled"):
            raise ValueError(f"unknown diameter mode {self.diameter_mode!r}")
        if self.diameter is not None and self.diameter <= 0:
            raise ValueError("diameter must be positive")


class NeighborEntry(NamedTuple):
    index: int          # transition index in the batch
    distance: float     # raw metric distance
    norm_distance: float


NeighborSet = list[NeighborEntry]


def _pairwise_dist(points: np.ndarray, q: np.ndarray, norm: str) -> np.ndarray:
    diff = points - q
    if norm == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=1))
    return np.sum(np.abs(diff), axis=1)


def diameter(batch: Batch, mode: str = "exact", probes: int = 32,
             norm: str = "euclidean", seed: int = 0) -> float:
    """Diameter of the core-state cloud.

    Exact mode scans all pairs. Sampled mode takes the max distance from
    `probes` uniformly drawn core states to all core states, a lower bound
    on the true diameter. Degenerate clouds (fewer than two distinct
    points) get the sentinel 1.0 so normalized distances equal raw ones.
    """
    pts = np.asarray(core_states(batch), dtype=float)
    if len(pts) < 2:
        warnings.warn("degenerate core-state cloud; diameter set to 1.0",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, len(pts), size=min(probes, len(pts)))
        best = 0.0
        for i in idx:
            best = max(best, float(_pairwise_dist(pts, pts[i], norm).max()))
    else:
        best = 0.0
        for i in range(len(pts) - 1):
            best = max(best, float(_pairwise_dist(pts[i + 1:], pts[i], norm).max()))
    if best == 0.0:
        warnings.warn("degenerate core-state cloud; diameter set to 1.0",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    return best


@dataclass
class NeighborIndex:
    """Immutable per-action brute-force index; safe for concurrent queries."""
    norm: str
    diameter: float
    action_count: int
    batch: Batch = field(repr=False)
    # per action: (n_a, dim) source coordinates and (n_a,) transition indices,
    # both in file order so stable sorts break ties by transition index
    _points: list[np.ndarray] = field(repr=False)
    _indices: list[np.ndarray] = field(repr=False)

    def size(self, action: int) -> int:
        return len(self._indices[action])

    def query(self, s: State, a: int, k: int,
              alpha: float = math.inf) -> NeighborSet:
        """At most k same-action sources with normalized distance <= alpha."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if not 0 <= a < self.action_count:
            raise ValueError(f"action {a} out of range")
        pts = self._points[a]
        if len(pts) == 0:
            return []
        d = _pairwise_dist(pts, np.asarray(s, dtype=float), self.norm)
        order = np.argsort(d, kind="stable")
        out: NeighborSet = []
        for j in order[:k] if alpha == math.inf else order:
            nd = d[j] / self.diameter
            if nd > alpha:
                break
            out.append(NeighborEntry(int(self._indices[a][j]), float(d[j]), float(nd)))
            if len(out) == k:
                break
        return out


def build_index(batch: Batch, metric: MetricConfig | None = None) -> NeighborIndex:
    """One sub-index per action over that action's source states.

    Actions with no transitions get an empty sub-index; queries against
    them return empty neighbor sets.
    """
    metric = metric or MetricConfig()
    if metric.diameter is not None:
        diam = metric.diameter
    else:
        diam = diameter(batch, mode=metric.diameter_mode, probes=metric.probes,
                        norm=metric.norm, seed=metric.seed)
    points: list[np.ndarray] = []
    indices: list[np.ndarray] = []
    for a in range(batch.action_count):
        rows = [(i, tr.s) for i, tr in enumerate(batch.transitions) if tr.a == a]
        if rows:
            points.append(np.asarray([s for _, s in rows], dtype=float))
            indices.append(np.asarray([i for i, _ in rows], dtype=int))
        else:
            points.append(np.empty((0, batch.dim)))
            indices.append(np.empty((0,), dtype=int))
    return NeighborIndex(metric.norm, diam, batch.action_count, batch,
                         points, indices)
