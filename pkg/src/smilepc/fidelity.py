"""Agreement metrics between the black box and the surrogate.

f is the black-box probability of the explained class per perturbation,
g the surrogate prediction, w the kernel weight.  The weighted losses
divide by the number of perturbations (not the weight sum), and the
weighted R^2 uses the weighted mean of f in the denominator only; the
fully-weighted conventional variant is exposed separately and is not used
in reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np


class UndefinedMetricError(ValueError):
    """Raised when a metric's denominator is identically zero."""


CSV_HEADER = ("C", "L_m", "L1", "L1w", "L2", "L2w", "R2w", "adjR2w")


def _pair(f, g):
    f = np.asarray(f, dtype=np.float64).ravel()
    g = np.asarray(g, dtype=np.float64).ravel()
    if f.shape != g.shape or f.size == 0:
        raise ValueError("f and g must be non-empty arrays of equal length")
    return f, g


def _triple(f, g, w):
    f, g = _pair(f, g)
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.shape != f.shape:
        raise ValueError("weights must match f and g in length")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    return f, g, w


def mean_loss(f, g) -> float:
    """Absolute difference of the means of f and g."""
    f, g = _pair(f, g)
    return float(abs(f.mean() - g.mean()))


def l1_loss(f, g) -> float:
    f, g = _pair(f, g)
    return float(np.abs(f - g).mean())


def l2_loss(f, g) -> float:
    f, g = _pair(f, g)
    return float(((f - g) ** 2).mean())


def weighted_l1_loss(f, g, w) -> float:
    """sum(w * |f - g|) / Np; the divisor is the count, not the weight sum."""
    f, g, w = _triple(f, g, w)
    return float(np.sum(w * np.abs(f - g)) / f.size)


def weighted_l2_loss(f, g, w) -> float:
    """sum(w * (f - g)^2) / Np; the divisor is the count, not the weight sum."""
    f, g, w = _triple(f, g, w)
    return float(np.sum(w * (f - g) ** 2) / f.size)


def weighted_r2(f, g, w) -> float:
    """1 - sum((f-g)^2) / sum((f - fbar_w)^2) with fbar_w = sum(w f)/sum(w).

    Only the centering uses the weights; both sums of squares are plain.
    Raises UndefinedMetricError when f has zero variance around its
    weighted mean.
    """
    f, g, w = _triple(f, g, w)
    wsum = float(w.sum())
    if wsum <= 0.0:
        raise ValueError("all weights are zero")
    fbar = float(np.dot(w, f)) / wsum
    den = float(np.sum((f - fbar) ** 2))
    if den == 0.0:
        raise UndefinedMetricError("f has zero variance around its weighted mean")
    num = float(np.sum((f - g) ** 2))
    return 1.0 - num / den


def weighted_r2_conventional(f, g, w) -> float:
    """Fully weighted variant: both sums of squares carry the weights."""
    f, g, w = _triple(f, g, w)
    wsum = float(w.sum())
    if wsum <= 0.0:
        raise ValueError("all weights are zero")
    fbar = float(np.dot(w, f)) / wsum
    den = float(np.sum(w * (f - fbar) ** 2))
    if den == 0.0:
        raise UndefinedMetricError("f has zero weighted variance around its weighted mean")
    num = float(np.sum(w * (f - g) ** 2))
    return 1.0 - num / den


def adjusted_weighted_r2(r2w: float, n_samples: int, n_features: int) -> float:
    """1 - (1 - R2w) * (Np - 1) / (Np - Ns - 1); requires Np > Ns + 1."""
    if n_samples <= n_features + 1:
        raise ValueError(
            f"adjusted R2 needs more samples than features + 1 (got Np={n_samples}, Ns={n_features})"
        )
    return 1.0 - (1.0 - r2w) * (n_samples - 1) / (n_samples - n_features - 1)


@dataclass(frozen=True)
class FidelityReport:
    """One row of agreement metrics for a fitted explanation."""

    n_features: int
    n_perturbations: int
    l_m: float
    l1: float
    l1w: float
    l2: float
    l2w: float
    r2w: float
    adj_r2w: float

    def to_csv_row(self) -> list:
        return [
            self.n_features,
            self.l_m,
            self.l1,
            self.l1w,
            self.l2,
            self.l2w,
            self.r2w,
            self.adj_r2w,
        ]

    def to_json_dict(self) -> dict:
        return {
            "C": int(self.n_features),
            "L_m": self.l_m,
            "L1": self.l1,
            "L1w": self.l1w,
            "L2": self.l2,
            "L2w": self.l2w,
            "R2w": self.r2w,
            "adjR2w": self.adj_r2w,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def fidelity_report(explanation, f=None) -> "FidelityReport":
    """All metrics for an Explanation in one report.

    f defaults to the black-box targets stored on the explanation; g is the
    surrogate prediction vector and w the kernel weights.  Undefined metrics
    come back as NaN where the standalone ops raise: R2w when f is constant
    (a constant-output model is legitimate input here), adjusted R2w when
    Np <= Ns + 1.
    """
    f = explanation.targets if f is None else np.asarray(f, dtype=np.float64)
    g = explanation.fit.predictions
    w = explanation.weights
    try:
        r2w = weighted_r2(f, g, w)
    except UndefinedMetricError:
        r2w = math.nan
    n_features = int(explanation.fit.n_features)
    n_perturbations = int(len(f))
    if math.isfinite(r2w) and n_perturbations > n_features + 1:
        adj = adjusted_weighted_r2(r2w, n_perturbations, n_features)
    else:
        adj = math.nan
    return FidelityReport(
        n_features=n_features,
        n_perturbations=n_perturbations,
        l_m=mean_loss(f, g),
        l1=l1_loss(f, g),
        l1w=weighted_l1_loss(f, g, w),
        l2=l2_loss(f, g),
        l2w=weighted_l2_loss(f, g, w),
        r2w=r2w,
        adj_r2w=adj,
    )
