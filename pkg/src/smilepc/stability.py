"""Ball-insertion stability of saliency sets.

Protocol: explain the original cloud, then repeatedly inject a small ball
of points around a randomly chosen surface point, re-explain with the
clustering frozen (the ball becomes one appended cluster) and the selected
cluster count held fixed, and compare the two top sets by Jaccard
similarity.  Trials that flip the predicted class are discarded and
redrawn, with a bounded attempt budget.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .blackbox import Classifier, validate_probs
from .clustering import ClusterModel
from .explain import ExplainConfig, Explanation, config_with_explained_class, explain, saliency
from .geometry import PointCloud, write_saliency_ply
from .seeding import derive_seed

DEFAULT_TRIALS = 10
DEFAULT_BALL_POINTS = 30
DEFAULT_RADIUS_FACTOR = 0.05
ATTEMPT_BUDGET_FACTOR = 10


def jaccard(a, b) -> float:
    """|A & B| / |A | B|; two empty sets count as identical."""
    a, b = set(a), set(b)
    union = a | b
    if not union:
        return 1.0
    return len(a & b) / len(union)


def bounding_box_diagonal(cloud: PointCloud) -> float:
    extent = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    return float(np.linalg.norm(extent))


def insert_ball(
    cloud: PointCloud,
    clusters: ClusterModel,
    n_ball: int,
    radius: float,
    seed: int,
    center=None,
) -> tuple:
    """Append a uniform ball of points and extend the cluster model.

    The ball center defaults to a uniformly drawn existing point.  The
    original points keep their cluster ids; the ball becomes cluster id C
    with its centroid at the ball center.  Returns (cloud, model, ball_id).
    """
    if n_ball < 1:
        raise ValueError("ball needs at least one point")
    if radius <= 0:
        raise ValueError("ball radius must be positive")
    if clusters.n != cloud.n:
        raise ValueError("cluster model does not cover this cloud")
    rng = np.random.default_rng(seed)
    if center is None:
        center = cloud.points[int(rng.integers(cloud.n))]
    center = np.asarray(center, dtype=np.float64)
    dirs = rng.normal(size=(n_ball, 3))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = radius * rng.random(n_ball) ** (1.0 / 3.0)
    ball = center + (dirs / norms) * radii[:, None]

    new_cloud = PointCloud(np.concatenate([cloud.points, ball]))
    ball_id = clusters.c
    assignment = np.concatenate([clusters.assignment, np.full(n_ball, ball_id, dtype=np.int64)])
    centroids = np.concatenate([clusters.centroids, center[None, :]])
    ball_sse = float(np.einsum("ij,ij->", ball - center, ball - center))
    extended = ClusterModel(assignment, centroids, clusters.c + 1, clusters.sse + ball_sse)
    return new_cloud, extended, ball_id


@dataclass(frozen=True)
class StabilityReport:
    """Per-trial Jaccard similarities against the unperturbed explanation."""

    trials: int
    jaccard_scores: tuple
    mean_jaccard: float
    ball_centers: tuple
    attempts: int
    held_k: int

    def to_json_dict(self) -> dict:
        return {
            "trials": int(self.trials),
            "jaccard_scores": [float(v) for v in self.jaccard_scores],
            "mean_jaccard": float(self.mean_jaccard),
            "ball_centers": [[float(v) for v in c] for c in self.ball_centers],
            "attempts": int(self.attempts),
            "held_k": int(self.held_k),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def stability_run(
    cloud: PointCloud,
    model: Classifier,
    config: ExplainConfig,
    *,
    trials: int = DEFAULT_TRIALS,
    n_ball: int = DEFAULT_BALL_POINTS,
    radius: float | None = None,
    dump_dir=None,
    base_explanation: Explanation | None = None,
) -> StabilityReport:
    """Run the ball-insertion protocol.

    The ball radius defaults to 5% of the bounding-box diagonal.  Trials
    whose ball flips the predicted class are discarded and redrawn from
    the next derived seed; after 10x the requested trials the run aborts.
    The per-trial explanations keep the base clustering (plus the ball
    cluster) and the base top-set size k = ceil(top_fraction * C).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if radius is None:
        radius = DEFAULT_RADIUS_FACTOR * bounding_box_diagonal(cloud)
    base = base_explanation if base_explanation is not None else explain(cloud, model, config)
    base_top = set(int(i) for i in base.top_set)
    held_k = len(base.top_set)
    pinned = config_with_explained_class(config, base.explained_class)

    scores = []
    centers = []
    attempts = 0
    budget = ATTEMPT_BUDGET_FACTOR * trials
    while len(scores) < trials:
        if attempts >= budget:
            raise RuntimeError(
                f"stability run exhausted {budget} attempts but only "
                f"{len(scores)} of {trials} trials preserved the prediction"
            )
        trial_seed = derive_seed("ball", config.seed, attempts)
        attempts += 1
        new_cloud, extended, _ = insert_ball(cloud, base.cluster_model, n_ball, radius, trial_seed)
        probs = validate_probs(model.classify(new_cloud), model.descriptor.n_classes)
        if int(np.argmax(probs)) != base.explained_class:
            continue  # prediction flipped: redraw
        trial = explain(new_cloud, model, pinned, cluster_model=extended, top_k=held_k)
        scores.append(jaccard(base_top, set(int(i) for i in trial.top_set)))
        centers.append(tuple(float(v) for v in extended.centroids[-1]))
        if dump_dir is not None:
            path = f"{dump_dir}/trial_{len(scores):03d}.ply"
            write_saliency_ply(saliency(trial, new_cloud), path)
    mean = math.fsum(scores) / len(scores)
    return StabilityReport(
        trials=trials,
        jaccard_scores=tuple(scores),
        mean_jaccard=mean,
        ball_centers=tuple(centers),
        attempts=attempts,
        held_k=held_k,
    )
