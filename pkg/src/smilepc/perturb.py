"""Binary mask design matrix and masked-cloud realization.

Row 0 of every mask matrix is all-ones (the unperturbed instance); the
remaining rows are independent Bernoulli(0.5) draws with all-zero rows
redrawn.  Each row gets its own generator seeded from (base seed, row), so
the matrix for a smaller row count is a prefix of the matrix for a larger
one, and dropping trailing clusters keeps the shared column prefix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .geometry import PointCloud, _freeze
from .seeding import derive_seed


@dataclass(frozen=True)
class MaskMatrix:
    """(Np, C) matrix of 0/1 cluster activations."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.uint8)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ValueError("rows must have shape (Np, C) with Np, C >= 1")
        if not np.isin(rows, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        if not rows[0].all():
            raise ValueError("row 0 must be the all-ones mask")
        if (rows.sum(axis=1) == 0).any():
            raise ValueError("all-zero mask rows are not allowed")
        object.__setattr__(self, "rows", _freeze(rows))

    @property
    def n_perturbations(self) -> int:
        return self.rows.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.rows.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "np": int(self.n_perturbations),
                "c": int(self.n_clusters),
                "rows": [[int(v) for v in row] for row in self.rows],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "MaskMatrix":
        doc = json.loads(text)
        rows = np.asarray(doc["rows"], dtype=np.uint8)
        if rows.shape != (doc["np"], doc["c"]):
            raise ValueError("rows shape does not match declared np/c")
        return cls(rows)


def generate_masks(n_perturbations: int, n_clusters: int, seed: int) -> MaskMatrix:
    """Deterministic mask matrix for a base seed."""
    if n_perturbations < 1 or n_clusters < 1:
        raise ValueError("need at least one row and one cluster")
    rows = np.empty((n_perturbations, n_clusters), dtype=np.uint8)
    rows[0] = 1
    for i in range(1, n_perturbations):
        rng = np.random.default_rng(derive_seed("mask", seed, i))
        row = rng.integers(0, 2, size=n_clusters, dtype=np.uint8)
        while not row.any():
            row = rng.integers(0, 2, size=n_clusters, dtype=np.uint8)
        rows[i] = row
    return MaskMatrix(rows)


def realize(
    cloud: PointCloud,
    clusters: ClusterModel,
    mask_row: np.ndarray,
    target_n: int,
    seed: int,
) -> PointCloud:
    """Materialize a masked cloud at a fixed point count.

    Points in switched-off clusters are removed; the survivors are padded
    back to ``target_n`` by uniform resampling with replacement so the
    black box always sees the point count it expects.  An all-ones mask
    returns the input unchanged.  Point order is the input order for the
    retained block, followed by the resampled padding.
    """
    mask = np.asarray(mask_row)
    if mask.shape != (clusters.c,):
        raise ValueError(f"mask row must have shape ({clusters.c},)")
    if clusters.n != cloud.n:
        raise ValueError("cluster model does not cover this cloud")
    if target_n < 1:
        raise ValueError("target_n must be positive")
    on = mask.astype(bool)
    if not on.any():
        raise ValueError("mask row switches off every cluster")
    retained = np.flatnonzero(on[clusters.assignment])
    k = retained.size
    if k == target_n:
        return cloud if k == cloud.n else PointCloud(cloud.points[retained])
    rng = np.random.default_rng(seed)
    if k < target_n:
        pad = rng.integers(0, k, size=target_n - k)
        idx = np.concatenate([retained, retained[pad]])
    else:
        keep = np.sort(rng.choice(k, size=target_n, replace=False))
        idx = retained[keep]
    return PointCloud(cloud.points[idx])
