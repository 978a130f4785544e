"""Interpretable surrogate fits over the mask design matrix.

Two fitters share the SurrogateFit result type: plain weighted least
squares with a tiny ridge floor for rank safety, and a Bayesian ridge
whose regularization is tuned by evidence maximization.  Both keep the
intercept unpenalized.

Weighted normal matrices are accumulated with np.einsum and solved with
the hand-rolled Cholesky kernel so coefficients do not depend on BLAS
threading; that keeps serialized explanations byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import _freeze
from .perturb import MaskMatrix

RIDGE_FLOOR = 1e-8
GAMMA_PRIOR = 1e-6
BAYES_TOLERANCE = 1e-4
BAYES_MAX_ITERATIONS = 300

WLS = "wls"
BAYESIAN_RIDGE = "bayes"
SURROGATE_KINDS = (WLS, BAYESIAN_RIDGE)


@dataclass(frozen=True)
class SurrogateFit:
    """Linear model over cluster activations: intercept + coefficients."""

    kind: str
    intercept: float
    coefficients: np.ndarray
    predictions: np.ndarray

    def __post_init__(self):
        if self.kind not in SURROGATE_KINDS:
            raise ValueError(f"unknown surrogate kind {self.kind!r}")
        coef = np.ascontiguousarray(self.coefficients, dtype=np.float64)
        preds = np.ascontiguousarray(self.predictions, dtype=np.float64)
        if coef.ndim != 1 or coef.size < 1:
            raise ValueError("coefficients must be a non-empty 1-D array")
        if preds.ndim != 1:
            raise ValueError("predictions must be 1-D")
        object.__setattr__(self, "coefficients", _freeze(coef))
        object.__setattr__(self, "predictions", _freeze(preds))

    @property
    def n_features(self) -> int:
        return self.coefficients.size

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "intercept": float(self.intercept),
            "coefficients": [float(v) for v in self.coefficients],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def _validate_fit_inputs(masks: MaskMatrix, targets, weights):
    y = np.asarray(targets, dtype=np.float64).ravel()
    w = np.asarray(weights, dtype=np.float64).ravel()
    n = masks.n_perturbations
    if y.shape != (n,) or w.shape != (n,):
        raise ValueError(f"targets and weights must have shape ({n},)")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(w)):
        raise ValueError("targets and weights must be finite")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    if not (w > 0).any():
        raise ValueError("all weights are zero")
    z = masks.rows.astype(np.float64)
    return z, y, w


def fit_wls(masks: MaskMatrix, targets, weights) -> SurrogateFit:
    """Weighted least squares with intercept.

    Minimizes sum(w * (y - b0 - Z @ b)^2) through the normal equations,
    with RIDGE_FLOOR added to the diagonal so collinear mask columns stay
    solvable.  Rows with zero weight have no influence.
    """
    z, y, w = _validate_fit_inputs(masks, targets, weights)
    zaug = np.concatenate([np.ones((z.shape[0], 1)), z], axis=1)
    a = np.einsum("i,ij,ik->jk", w, zaug, zaug)
    a[np.diag_indices_from(a)] += RIDGE_FLOOR
    b = np.einsum("i,i,ij->j", w, y, zaug)
    beta = kernels.solve_spd(a, b)
    intercept = float(beta[0])
    coef = beta[1:]
    preds = intercept + np.einsum("ij,j->i", z, coef)
    return SurrogateFit(WLS, intercept, coef, preds)


def fit_bayesian_ridge(masks: MaskMatrix, targets, weights) -> SurrogateFit:
    """Bayesian ridge with evidence-maximized hyperparameters.

    Rows are scaled by sqrt(weight); the design is centered with the
    weighted mean so the intercept stays unpenalized (all-equal targets
    collapse to zero coefficients and intercept = target mean).  Noise
    precision alpha and coefficient precision lambda follow the standard
    Gamma(1e-6, 1e-6) hyperprior updates until their relative change drops
    below 1e-4 or 300 iterations pass.
    """
    z, y, w = _validate_fit_inputs(masks, targets, weights)
    wsum = float(w.sum())
    xbar = np.einsum("i,ij->j", w, z) / wsum
    ybar = float(np.dot(w, y)) / wsum
    sw = np.sqrt(w)
    xc = (z - xbar) * sw[:, None]
    yc = (y - ybar) * sw
    gram = np.einsum("ij,ik->jk", xc, xc)
    xty = np.einsum("ij,i->j", xc, yc)
    evals, vecs = np.linalg.eigh(gram)
    evals = np.maximum(evals, 0.0)
    proj = vecs.T @ xty
    n = float(z.shape[0])

    yvar = float(np.var(yc))
    alpha = 1.0 / yvar if yvar > 0.0 else 1.0
    lam = 1.0
    coef = np.zeros(z.shape[1])
    for _ in range(BAYES_MAX_ITERATIONS):
        denom = alpha * evals + lam
        coef = vecs @ (alpha * proj / denom)
        gamma = float(np.sum(alpha * evals / denom))
        resid = yc - xc @ coef
        rss = float(np.dot(resid, resid))
        ssq = float(np.dot(coef, coef))
        lam_new = (gamma + 2.0 * GAMMA_PRIOR) / (ssq + 2.0 * GAMMA_PRIOR)
        alpha_new = (n - gamma + 2.0 * GAMMA_PRIOR) / (rss + 2.0 * GAMMA_PRIOR)
        lam_new = min(max(lam_new, 1e-12), 1e12)  # guardrails, degenerate targets
        alpha_new = min(max(alpha_new, 1e-12), 1e12)
        done = (
            abs(alpha_new - alpha) <= BAYES_TOLERANCE * abs(alpha)
            and abs(lam_new - lam) <= BAYES_TOLERANCE * abs(lam)
        )
        alpha, lam = alpha_new, lam_new
        if done:
            break
    denom = alpha * evals + lam
    coef = vecs @ (alpha * proj / denom)
    intercept = ybar - float(np.dot(xbar, coef))
    preds = intercept + np.einsum("ij,j->i", z, coef)
    return SurrogateFit(BAYESIAN_RIDGE, intercept, coef, preds)


def fit_surrogate(kind: str, masks: MaskMatrix, targets, weights) -> SurrogateFit:
    if kind == WLS:
        return fit_wls(masks, targets, weights)
    if kind == BAYESIAN_RIDGE:
        return fit_bayesian_ridge(masks, targets, weights)
    raise ValueError(f"unknown surrogate kind {kind!r}")


def top_k_clusters(fit: SurrogateFit, k: int, *, by_magnitude: bool = False) -> np.ndarray:
    """Indices of the k highest coefficients, descending, ties by index."""
    if not 1 <= k <= fit.n_features:
        raise ValueError(f"k must be in [1, {fit.n_features}], got {k}")
    key = np.abs(fit.coefficients) if by_magnitude else fit.coefficients
    order = np.argsort(-key, kind="stable")  # stable keeps smaller index first on ties
    return order[:k].astype(np.int64)


def top_clusters(fit: SurrogateFit, fraction: float, *, by_magnitude: bool = False) -> np.ndarray:
    """Top ceil(fraction * C) clusters by signed coefficient.

    Signed ranking is the default (positive evidence for the explained
    class); magnitude ranking is available for ablation-style use.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    # tiny slack so exact-integer products do not round up (e.g. 0.35 * 20)
    k = math.ceil(fraction * fit.n_features - 1e-12)
    return top_k_clusters(fit, max(k, 1), by_magnitude=by_magnitude)
