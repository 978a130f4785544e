"""Deterministic generators for the four reference shapes.

These drive the built-in classifier's prototypes, the CLI's make-shape
command, and the test fixtures.  All generators return normalized clouds
(zero centroid, unit max norm).
"""

from __future__ import annotations

import numpy as np

from .geometry import PointCloud, normalize

SHAPE_NAMES = ("sphere", "box", "plate", "cross")


def make_sphere(n: int, seed: int) -> PointCloud:
    """Uniform sample of the unit sphere surface."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n, 3))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return normalize(PointCloud(v / norms))


def make_box(n: int, seed: int) -> PointCloud:
    """Uniform sample of the surface of the cube [-1, 1]^3."""
    rng = np.random.default_rng(seed)
    face = rng.integers(0, 6, size=n)
    uv = rng.uniform(-1.0, 1.0, size=(n, 2))
    pts = np.empty((n, 3))
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    for a in range(3):
        hit = axis == a
        others = [i for i in range(3) if i != a]
        pts[hit, a] = sign[hit]
        pts[hit, others[0]] = uv[hit, 0]
        pts[hit, others[1]] = uv[hit, 1]
    return normalize(PointCloud(pts))


def make_plate(n: int, seed: int) -> PointCloud:
    """Thin square slab: [-1, 1]^2 in x, y with 4% thickness in z."""
    rng = np.random.default_rng(seed)
    pts = np.column_stack(
        [
            rng.uniform(-1.0, 1.0, size=n),
            rng.uniform(-1.0, 1.0, size=n),
            rng.uniform(-0.02, 0.02, size=n),
        ]
    )
    return normalize(PointCloud(pts))


def make_cross(n: int, seed: int) -> PointCloud:
    """Three orthogonal square bars of half-width 0.15 through the origin."""
    rng = np.random.default_rng(seed)
    bar = rng.integers(0, 3, size=n)
    long = rng.uniform(-1.0, 1.0, size=n)
    thin = rng.uniform(-0.15, 0.15, size=(n, 2))
    pts = np.empty((n, 3))
    for a in range(3):
        hit = bar == a
        others = [i for i in range(3) if i != a]
        pts[hit, a] = long[hit]
        pts[hit, others[0]] = thin[hit, 0]
        pts[hit, others[1]] = thin[hit, 1]
    return normalize(PointCloud(pts))


_GENERATORS = {
    "sphere": make_sphere,
    "box": make_box,
    "plate": make_plate,
    "cross": make_cross,
}


def make_shape(name: str, n: int, seed: int) -> PointCloud:
    try:
        gen = _GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown shape {name!r}; choose from {SHAPE_NAMES}") from None
    return gen(n, seed)
