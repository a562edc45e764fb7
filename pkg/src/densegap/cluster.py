"""Density clustering and per-class core-distribution centroids.

The clustering is classic DBSCAN with a closed eps-ball and self-inclusive
neighbor counts: p is core iff at least min_pts points (p included) lie
within eps. Clusters are the connected components of the core-to-core
eps-graph, numbered by ascending first core index; a non-core point joins
the cluster of the lowest-index core point within eps, or is noise if there
is none. The core/noise split is therefore invariant to row permutations
even though border-cluster choice is order-dependent.

A class centroid is the coordinate-wise median of that class's non-noise
points; a class with no non-noise points falls back to the median over all
of its rows and is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import FeatureMatrix
from .errors import EmptyClass, TooFewPoints

NOISE = -1

# Cap on the temporary (chunk x n x d) difference tensor used for exact
# pairwise distances.
_CHUNK_FLOATS = 4_000_000


@dataclass(frozen=True)
class DbscanParams:
    """Neighborhood radius and density threshold (self-inclusive)."""

    eps: float
    min_pts: int = 4

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps <= 0:
            raise ValueError("eps must be a finite positive real")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True, eq=False)
class ClusterResult:
    assignment: np.ndarray   # cluster id >= 0, or NOISE
    core_flags: np.ndarray
    cluster_count: int

    def non_noise(self) -> np.ndarray:
        return self.assignment != NOISE


def pairwise_distances(points: np.ndarray) -> np.ndarray:
    """Exact euclidean distance matrix, float64, chunked to bound memory."""
    pts = np.asarray(points, dtype=np.float64)
    n, d = pts.shape
    out = np.empty((n, n), dtype=np.float64)
    chunk = max(1, _CHUNK_FLOATS // max(1, n * d))
    for start in range(0, n, chunk):
        diff = pts[start:start + chunk, None, :] - pts[None, :, :]
        out[start:start + chunk] = np.sqrt((diff * diff).sum(axis=2))
    return out


def dbscan(points, params: DbscanParams) -> ClusterResult:
    """Cluster `points` (n x d); degenerate inputs yield all-noise, never fail."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("points must be a nonempty 2-D array")
    n = pts.shape[0]
    within = pairwise_distances(pts) <= params.eps
    core = within.sum(axis=1) >= params.min_pts

    assignment = np.full(n, NOISE, dtype=np.int64)
    cluster_count = 0
    for i in np.nonzero(core)[0]:
        if assignment[i] != NOISE:
            continue
        stack = [int(i)]
        assignment[i] = cluster_count
        while stack:
            p = stack.pop()
            for q in np.nonzero(within[p] & core)[0]:
                if assignment[q] == NOISE:
                    assignment[q] = cluster_count
                    stack.append(int(q))
        cluster_count += 1

    for p in np.nonzero(~core)[0]:
        hits = np.nonzero(within[p] & core)[0]
        if hits.size:
            assignment[p] = assignment[hits[0]]

    assignment.flags.writeable = False
    core.flags.writeable = False
    return ClusterResult(assignment=assignment, core_flags=core, cluster_count=cluster_count)


def suggest_eps(points, min_pts: int) -> float:
    """k-distance heuristic: 90th percentile of each point's distance to its
    min_pts-th nearest neighbor (self-inclusive). Returns 0.0 for coincident
    points; eps must stay positive, so the caller overrides in that case.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[0] <= min_pts:
        raise TooFewPoints(f"need more than min_pts={min_pts} points, got {pts.shape[0]}")
    dist = np.sort(pairwise_distances(pts), axis=1)
    kth = dist[:, min_pts - 1]
    return float(np.percentile(kth, 90.0))


@dataclass(frozen=True, eq=False)
class CentroidSet:
    """One centroid per class (coordinate-wise median of its core points)."""

    centroids: np.ndarray           # (class_count, d) float64
    class_names: tuple[str, ...]
    fit_meta: dict

    def __post_init__(self):
        cents = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if cents.ndim != 2 or cents.shape[0] != len(self.class_names):
            raise ValueError("need one centroid row per class")
        if not np.all(np.isfinite(cents)):
            raise ValueError("centroids must be finite")
        cents.flags.writeable = False
        object.__setattr__(self, "centroids", cents)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def d(self) -> int:
        return self.centroids.shape[1]


def fit_centroids(m: FeatureMatrix, params: DbscanParams) -> CentroidSet:
    """Run dbscan per class and reduce each class's non-noise rows to a
    coordinate-wise median centroid (even counts average the middle pair).
    """
    values = m.values.astype(np.float64)
    centroids = np.empty((len(m.class_names), m.d), dtype=np.float64)
    fit_meta: dict[str, dict] = {}
    for c, name in enumerate(m.class_names):
        rows = values[m.labels == c]
        if rows.shape[0] == 0:
            raise EmptyClass(f"class {name!r} has no samples")
        result = dbscan(rows, params)
        keep = result.non_noise()
        fallback = not keep.any()
        used = rows if fallback else rows[keep]
        centroids[c] = np.median(used, axis=0)
        fit_meta[name] = {
            "core_points": int(result.core_flags.sum()),
            "used_points": int(used.shape[0]),
            "fallback": fallback,
        }
    return CentroidSet(centroids=centroids, class_names=m.class_names, fit_meta=fit_meta)
