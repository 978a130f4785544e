"""Empirical-CDF machinery and perturbation distance functions.

The ECDF distances compare the original and a perturbed cloud per
coordinate axis and sum the three axis distances.  The cosine distance
ignores geometry entirely and scores the binary mask against the all-ones
reference, which is the classic interpretable-space locality measure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import PointCloud, _freeze


class DistanceKind(str, enum.Enum):
    COSINE = "cosine"
    WASSERSTEIN = "wd"
    KOLMOGOROV_SMIRNOV = "ks"
    ANDERSON_DARLING = "ad"


ECDF_KINDS = (
    DistanceKind.WASSERSTEIN,
    DistanceKind.KOLMOGOROV_SMIRNOV,
    DistanceKind.ANDERSON_DARLING,
)


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF of a 1-D sample."""

    sorted_values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.sorted_values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("need a non-empty 1-D sample")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sample values must be finite")
        if np.any(np.diff(vals) < 0):
            raise ValueError("values must be sorted ascending")
        object.__setattr__(self, "sorted_values", _freeze(vals))

    @property
    def n(self) -> int:
        return self.sorted_values.size

    def evaluate(self, x) -> np.ndarray:
        """Fraction of the sample <= x (vectorized)."""
        x = np.asarray(x, dtype=np.float64)
        return np.searchsorted(self.sorted_values, x, side="right") / self.n

    @classmethod
    def from_sample(cls, sample) -> "Ecdf":
        return cls(np.sort(np.asarray(sample, dtype=np.float64)))


def _sorted_sample(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("empty sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("sample values must be finite")
    return np.sort(arr)


def wasserstein_1d(a, b) -> float:
    """First Wasserstein distance between two empirical distributions."""
    return float(kernels.wd_sorted(_sorted_sample(a), _sorted_sample(b)))


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(kernels.ks_sorted(_sorted_sample(a), _sorted_sample(b)))


def anderson_darling(a, b) -> float:
    """Two-sample Anderson-Darling statistic.

    (1/(n*m)) * sum_{j=1}^{N-1} (M_j*N - n*j)^2 / (j*(N-j)), with M_j the
    count of first-sample values among the j smallest pooled values and
    ties resolved first-sample-first.
    """
    return float(kernels.ad_sorted(_sorted_sample(a), _sorted_sample(b)))


def cosine_mask_distance(mask_row) -> float:
    """Cosine distance between a 0/1 mask row and the all-ones reference.

    For a row with s active clusters out of C this is 1 - sqrt(s / C).
    """
    mask = np.asarray(mask_row)
    c = mask.size
    if c < 1:
        raise ValueError("empty mask row")
    s = int(np.count_nonzero(mask))
    if s == 0:
        raise ValueError("mask row switches off every cluster")
    return 1.0 - math.sqrt(s / c)


_ECDF_FUNCS = {
    DistanceKind.WASSERSTEIN: kernels.wd_sorted,
    DistanceKind.KOLMOGOROV_SMIRNOV: kernels.ks_sorted,
    DistanceKind.ANDERSON_DARLING: kernels.ad_sorted,
}


def _sorted_axes(cloud: PointCloud):
    return tuple(np.sort(cloud.points[:, axis]) for axis in range(3))


def _ecdf_distance_sorted(kind: DistanceKind, original_axes, perturbed: PointCloud) -> float:
    func = _ECDF_FUNCS[kind]
    total = 0.0
    for axis in range(3):
        total += func(original_axes[axis], np.sort(perturbed.points[:, axis]))
    return float(total)


def cloud_distance(
    kind: DistanceKind,
    original: PointCloud,
    perturbed: PointCloud,
    mask_row=None,
) -> float:
    """Distance of a perturbed instance from the original.

    ECDF kinds sum the per-axis statistic over x, y, z; the cosine kind
    requires the mask row and ignores the clouds.
    """
    kind = DistanceKind(kind)
    if kind is DistanceKind.COSINE:
        if mask_row is None:
            raise ValueError("cosine distance requires the mask row")
        return cosine_mask_distance(mask_row)
    return _ecdf_distance_sorted(kind, _sorted_axes(original), perturbed)
