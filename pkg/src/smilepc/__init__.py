"""Model-agnostic saliency explanations for point-cloud classifiers.

The pipeline clusters a cloud into super-points, perturbs them with binary
masks, weights each perturbation by an empirical-CDF statistical distance
(or the classic cosine mask distance), and fits an interpretable linear
surrogate whose top coefficients mark the salient regions.
"""

__version__ = "0.1.0"

from .blackbox import (
    BridgeClassifier,
    BridgeError,
    BridgeExitError,
    BridgeProtocolError,
    BridgeTimeoutError,
    ClassifierDescriptor,
    ConstantClassifier,
    InvalidProbabilityError,
    ToyClassifier,
    make_classifier,
)
from .clustering import ClusterModel, farthest_point_sample, kmeans
from .explain import (
    DegenerateWeightsError,
    ExplainConfig,
    Explanation,
    explain,
    kernel_weight,
    saliency,
)
from .fidelity import FidelityReport, UndefinedMetricError, fidelity_report
from .geometry import (
    OffParseError,
    PointCloud,
    SaliencyCloud,
    TriangleMesh,
    normalize,
    read_off,
    read_xyz,
    sample_mesh,
    write_saliency_ply,
)
from .perturb import MaskMatrix, generate_masks, realize
from .stability import StabilityReport, insert_ball, jaccard, stability_run
from .stats import (
    DistanceKind,
    Ecdf,
    anderson_darling,
    cloud_distance,
    cosine_mask_distance,
    ks_distance,
    wasserstein_1d,
)
from .surrogate import SurrogateFit, fit_bayesian_ridge, fit_wls, top_clusters

__all__ = [
    "BridgeClassifier",
    "BridgeError",
    "BridgeExitError",
    "BridgeProtocolError",
    "BridgeTimeoutError",
    "ClassifierDescriptor",
    "ClusterModel",
    "ConstantClassifier",
    "DegenerateWeightsError",
    "DistanceKind",
    "Ecdf",
    "ExplainConfig",
    "Explanation",
    "FidelityReport",
    "InvalidProbabilityError",
    "MaskMatrix",
    "OffParseError",
    "PointCloud",
    "SaliencyCloud",
    "StabilityReport",
    "SurrogateFit",
    "ToyClassifier",
    "TriangleMesh",
    "UndefinedMetricError",
    "__version__",
    "anderson_darling",
    "cloud_distance",
    "cosine_mask_distance",
    "explain",
    "farthest_point_sample",
    "fidelity_report",
    "fit_bayesian_ridge",
    "fit_wls",
    "generate_masks",
    "insert_ball",
    "jaccard",
    "kernel_weight",
    "kmeans",
    "ks_distance",
    "make_classifier",
    "normalize",
    "read_off",
    "read_xyz",
    "realize",
    "saliency",
    "sample_mesh",
    "stability_run",
    "top_clusters",
    "wasserstein_1d",
    "write_saliency_ply",
]
