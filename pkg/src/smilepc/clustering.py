"""Super-point construction: farthest point sampling and Lloyd K-means.

Clusters ("super-points") are the interpretable units the explainer turns
on and off.  K-means is seeded with FPS-selected points so the super-points
cover the shape evenly, and the whole construction is deterministic for a
fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import PointCloud, _freeze

MAX_ITERATIONS = 100
SSE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ClusterModel:
    """Cluster assignment over a cloud plus the defining centroids.

    As produced by ``kmeans`` every point is assigned to its nearest
    centroid; models extended afterwards (see ``stability.insert_ball``)
    keep the original assignment frozen and may relax that property, so it
    is not enforced here.
    """

    assignment: np.ndarray
    centroids: np.ndarray
    c: int
    sse: float
    sse_history: tuple = field(default=(), compare=False)

    def __post_init__(self):
        assignment = np.ascontiguousarray(self.assignment, dtype=np.int64)
        centroids = np.ascontiguousarray(self.centroids, dtype=np.float64)
        if self.c < 1:
            raise ValueError("need at least one cluster")
        if assignment.ndim != 1 or assignment.shape[0] < 1:
            raise ValueError("assignment must be a non-empty 1-D array")
        if centroids.shape != (self.c, 3):
            raise ValueError(f"centroids must have shape ({self.c}, 3)")
        present = np.unique(assignment)
        if present[0] < 0 or present[-1] >= self.c:
            raise ValueError("assignment refers to an unknown cluster id")
        if present.size != self.c:
            missing = sorted(set(range(self.c)) - set(present.tolist()))
            raise ValueError(f"empty clusters: {missing}")
        object.__setattr__(self, "assignment", _freeze(assignment))
        object.__setattr__(self, "centroids", _freeze(centroids))

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.c)

    def to_json_dict(self) -> dict:
        return {
            "c": int(self.c),
            "assignment": [int(a) for a in self.assignment],
            "centroids": [[float(v) for v in row] for row in self.centroids],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str, cloud: PointCloud | None = None) -> "ClusterModel":
        """Rebuild a model; SSE is recomputed when the cloud is supplied."""
        doc = json.loads(text)
        assignment = np.asarray(doc["assignment"], dtype=np.int64)
        centroids = np.asarray(doc["centroids"], dtype=np.float64)
        sse = float("nan")
        if cloud is not None:
            diff = cloud.points - centroids[assignment]
            sse = float(np.einsum("ij,ij->", diff, diff))
        return cls(assignment, centroids, int(doc["c"]), sse)


def farthest_point_sample(cloud: PointCloud, k: int, seed: int) -> np.ndarray:
    """Greedy max-min-distance subset of k point indices.

    The first index is drawn uniformly from the seeded generator; each
    following pick maximizes the distance to the already-selected set,
    smallest index winning ties.
    """
    if not 1 <= k <= cloud.n:
        raise ValueError(f"k must be in [1, {cloud.n}], got {k}")
    rng = np.random.default_rng(seed)
    start = int(rng.integers(cloud.n))
    return kernels.fps_indices(cloud.points, k, start)


def _cluster_means(points: np.ndarray, labels: np.ndarray, c: int) -> np.ndarray:
    sums = np.zeros((c, 3), dtype=np.float64)
    np.add.at(sums, labels, points)
    counts = np.bincount(labels, minlength=c).astype(np.float64)
    return sums / counts[:, None]


def _point_sse(points, labels, centroids):
    diff = points - centroids[labels]
    return np.einsum("ij,ij->i", diff, diff)


def _ensure_nonempty(points, labels, centroids, c, sse):
    """Relocate centroids of empty clusters onto far points and reassign.

    Relocation never increases SSE: an empty centroid is nobody's nearest,
    so moving it only adds a (possibly closer) option.  The force branch
    handles duplicate-point degeneracies where relocation cannot separate
    ties; there the seized points sit at tied distance anyway.
    """
    for _ in range(c + 1):
        counts = np.bincount(labels, minlength=c)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return labels, centroids, sse
        centroids = centroids.copy()
        dist = _point_sse(points, labels, centroids)
        for e in empties:
            cand = dist.copy()
            cand[counts[labels] < 2] = -1.0  # never drain a singleton cluster
            victim = int(np.argmax(cand))
            centroids[e] = points[victim]
            counts[labels[victim]] -= 1
            counts[e] += 1
            dist[victim] = -1.0
        labels, sse = kernels.assign_clusters(points, centroids)
    # duplicate-point ties: force the assignment (distances tie at zero)
    labels = np.asarray(labels).copy()
    counts = np.bincount(labels, minlength=c)
    for e in np.flatnonzero(counts == 0):
        cand = _point_sse(points, labels, centroids)
        cand[counts[labels] < 2] = -1.0
        victim = int(np.argmax(cand))
        counts[labels[victim]] -= 1
        labels[victim] = e
        counts[e] += 1
    sse = float(np.sum(_point_sse(points, labels, centroids)))
    return labels, centroids, sse


def kmeans(cloud: PointCloud, c: int, seed: int) -> ClusterModel:
    """Lloyd iterations from FPS-selected seeds.

    Runs to an assignment fixpoint, an SSE improvement below 1e-9, or 100
    iterations, whichever comes first.  Empty clusters are repaired by
    relocating their centroid onto the point farthest from its own
    centroid.  The returned centroids are the ones that produced the final
    assignment, so every point is assigned to its nearest centroid.
    """
    if not 1 <= c <= cloud.n:
        raise ValueError(f"cluster count must be in [1, {cloud.n}], got {c}")
    points = cloud.points
    centroids = points[farthest_point_sample(cloud, c, seed)].copy()
    labels, sse = kernels.assign_clusters(points, centroids)
    labels, centroids, sse = _ensure_nonempty(points, labels, centroids, c, sse)
    history = [float(sse)]
    prev_labels, prev_sse = labels, sse
    for _ in range(MAX_ITERATIONS):
        centroids = _cluster_means(points, labels, c)
        labels, sse = kernels.assign_clusters(points, centroids)
        labels, centroids, sse = _ensure_nonempty(points, labels, centroids, c, sse)
        history.append(float(sse))
        if np.array_equal(labels, prev_labels):
            break
        if prev_sse - sse < SSE_TOLERANCE:
            break
        prev_labels, prev_sse = labels, sse
    return ClusterModel(labels, centroids, c, float(sse), tuple(history))
