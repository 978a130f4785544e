"""End-to-end explanation pipeline.

Cluster the cloud into super-points, realize masked perturbations, collect
black-box probabilities, weight each perturbation by its distance from the
original instance, fit an interpretable linear surrogate, and rank the
clusters.  Everything downstream of the config is deterministic: rerunning
with the same seed reproduces the serialized explanation byte for byte.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .blackbox import Classifier, validate_probs
from .clustering import ClusterModel, kmeans
from .geometry import PointCloud, SaliencyCloud, _freeze
from .perturb import MaskMatrix, generate_masks, realize
from .seeding import derive_seed
from .stats import DistanceKind, _ecdf_distance_sorted, _sorted_axes, cosine_mask_distance
from .surrogate import SURROGATE_KINDS, SurrogateFit, fit_surrogate, top_clusters, top_k_clusters

WEIGHT_FLOOR = 1e-300
DEFAULT_BATCH_SIZE = 64


class DegenerateWeightsError(RuntimeError):
    """Every kernel weight underflowed; the kernel width is far too small."""


class ClassifierInvocationError(RuntimeError):
    """The black box failed; carries the perturbation row range."""


@dataclass(frozen=True)
class ExplainConfig:
    """Pipeline parameters; validated on construction."""

    clusters: int = 32
    perturbations: int = 1000
    kernel_width: float = 0.5
    distance: DistanceKind = DistanceKind.WASSERSTEIN
    surrogate: str = "wls"
    top_fraction: float = 0.2
    seed: int = 0
    explained_class: int | None = None
    batch_size: int = DEFAULT_BATCH_SIZE

    def __post_init__(self):
        object.__setattr__(self, "distance", DistanceKind(self.distance))
        if self.clusters < 1:
            raise ValueError("clusters must be positive")
        if self.perturbations < 2:
            raise ValueError("need at least 2 perturbations")
        if not self.kernel_width > 0:
            raise ValueError("kernel width must be positive")
        if self.surrogate not in SURROGATE_KINDS:
            raise ValueError(f"unknown surrogate {self.surrogate!r}")
        if not 0.0 < self.top_fraction <= 1.0:
            raise ValueError("top fraction must be in (0, 1]")
        if self.explained_class is not None and self.explained_class < 0:
            raise ValueError("explained class index must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")

    def to_json_dict(self) -> dict:
        return {
            "clusters": int(self.clusters),
            "perturbations": int(self.perturbations),
            "kernel_width": float(self.kernel_width),
            "distance": self.distance.value,
            "surrogate": self.surrogate,
            "top_fraction": float(self.top_fraction),
            "seed": int(self.seed),
            "explained_class": None if self.explained_class is None else int(self.explained_class),
            "batch_size": int(self.batch_size),
        }


@dataclass(frozen=True)
class Explanation:
    """Everything the pipeline produced for one instance."""

    config: ExplainConfig
    cluster_model: ClusterModel
    explained_class: int
    f_original: np.ndarray
    targets: np.ndarray
    distances: np.ndarray
    weights: np.ndarray
    fit: SurrogateFit
    top_set: np.ndarray
    timings: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("f_original", "targets", "distances", "weights", "top_set"):
            arr = np.ascontiguousarray(getattr(self, name))
            object.__setattr__(self, name, _freeze(arr))

    def to_json_dict(self) -> dict:
        return {
            "config": self.config.to_json_dict(),
            "explained_class": int(self.explained_class),
            "f_original": [float(p) for p in self.f_original],
            "cluster_model": self.cluster_model.to_json_dict(),
            "distances": [float(d) for d in self.distances],
            "weights": [float(w) for w in self.weights],
            "targets": [float(t) for t in self.targets],
            "intercept": float(self.fit.intercept),
            "coefficients": [float(c) for c in self.fit.coefficients],
            "surrogate_kind": self.fit.kind,
            "top_set": [int(i) for i in self.top_set],
        }

    def to_json(self) -> str:
        # timings deliberately excluded: the document must be byte-stable
        return json.dumps(self.to_json_dict())


def kernel_weight(distance, kernel_width: float):
    """exp(-d^2 / sigma^2); exactly 1 at distance 0."""
    d = np.asarray(distance, dtype=np.float64)
    return np.exp(-(d**2) / float(kernel_width) ** 2)


def _classify_rows(model: Classifier, clouds, start_row: int, n_classes=None):
    try:
        probs = model.classify_batch(clouds)
    except Exception as exc:
        end_row = start_row + len(clouds) - 1
        raise ClassifierInvocationError(
            f"classifier failed on perturbation rows {start_row}..{end_row}: {exc}"
        ) from exc
    if len(probs) != len(clouds):
        raise ClassifierInvocationError(
            f"classifier returned {len(probs)} vectors for {len(clouds)} clouds "
            f"(rows {start_row}..{start_row + len(clouds) - 1})"
        )
    return [validate_probs(p, n_classes, context=f"perturbation row {start_row + i}") for i, p in enumerate(probs)]


def explain(
    cloud: PointCloud,
    model: Classifier,
    config: ExplainConfig,
    *,
    cluster_model: ClusterModel | None = None,
    top_k: int | None = None,
) -> Explanation:
    """Explain one classification.

    Row 0 of the design is the unperturbed instance: its distance is set
    to exactly 0 and its weight is exactly 1.  ``cluster_model`` overrides
    the internal K-means (the stability protocol freezes clustering across
    ball insertions); ``top_k`` overrides the fraction-derived cluster
    count for the same reason.  The classifier sees exactly
    ``config.perturbations`` clouds, in batches.
    """
    timings: dict = {}
    t0 = time.perf_counter()
    if cluster_model is None:
        cluster_model = kmeans(cloud, config.clusters, config.seed)
    elif cluster_model.n != cloud.n:
        raise ValueError("cluster model does not cover this cloud")
    timings["cluster"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    masks = generate_masks(config.perturbations, cluster_model.c, config.seed)
    realized = [cloud]
    for i in range(1, masks.n_perturbations):
        realized.append(
            realize(cloud, cluster_model, masks.rows[i], cloud.n, derive_seed("realize", config.seed, i))
        )
    timings["realize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    batch = min(config.batch_size, model.descriptor.batch_limit)
    probs: list = []
    for lo in range(0, len(realized), batch):
        chunk = realized[lo : lo + batch]
        probs.extend(_classify_rows(model, chunk, lo, model.descriptor.n_classes))
    timings["classify"] = time.perf_counter() - t0

    f_original = probs[0]
    if config.explained_class is None:
        explained = int(np.argmax(f_original))  # first index wins ties
    else:
        explained = int(config.explained_class)
        if explained >= f_original.size:
            raise ValueError(
                f"explained class {explained} out of range for {f_original.size} classes"
            )
    targets = np.array([p[explained] for p in probs])

    t0 = time.perf_counter()
    distances = np.empty(masks.n_perturbations)
    distances[0] = 0.0
    if config.distance is DistanceKind.COSINE:
        for i in range(1, masks.n_perturbations):
            distances[i] = cosine_mask_distance(masks.rows[i])
    else:
        original_axes = _sorted_axes(cloud)
        for i in range(1, masks.n_perturbations):
            distances[i] = _ecdf_distance_sorted(config.distance, original_axes, realized[i])
    timings["distance"] = time.perf_counter() - t0

    weights = kernel_weight(distances, config.kernel_width)
    if float(weights.max()) < WEIGHT_FLOOR:
        raise DegenerateWeightsError(
            f"all kernel weights underflowed below {WEIGHT_FLOOR:g}; "
            f"increase the kernel width (got {config.kernel_width})"
        )

    t0 = time.perf_counter()
    fit = fit_surrogate(config.surrogate, masks, targets, weights)
    if top_k is None:
        top = top_clusters(fit, config.top_fraction)
    else:
        top = top_k_clusters(fit, top_k)
    timings["fit"] = time.perf_counter() - t0

    return Explanation(
        config=config,
        cluster_model=cluster_model,
        explained_class=explained,
        f_original=f_original,
        targets=targets,
        distances=distances,
        weights=weights,
        fit=fit,
        top_set=top,
        timings=timings,
    )


def explain_for_class(explanation: Explanation) -> int:
    """Class the explanation is about (argmax of f_original by default)."""
    return int(explanation.explained_class)


def saliency(explanation: Explanation, cloud: PointCloud) -> SaliencyCloud:
    """Per-point saliency flags from the explanation's top clusters."""
    model = explanation.cluster_model
    if model.n != cloud.n:
        raise ValueError("cluster model does not cover this cloud")
    hot = np.isin(model.assignment, explanation.top_set)
    return SaliencyCloud(cloud.points, model.assignment, hot)


def config_with_explained_class(config: ExplainConfig, explained: int) -> ExplainConfig:
    """Pin the explained class (used by the stability protocol)."""
    return replace(config, explained_class=int(explained))
