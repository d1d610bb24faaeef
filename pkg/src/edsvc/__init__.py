"""Support vector clustering with ensemble-driven parameter selection."""

from .data import load_csv, normalize_minmax, pairwise_sq_dists
from .ensemble import Ensemble, KMeansConfig, generate_ensemble, kmeans
from .estimator import (
    EDSVC,
    EstimationResult,
    SupportVectorClustering,
    build_c_grid,
    build_q_grid,
    edsvc,
    scan_c,
    scan_q,
)
from .labeling import Labeling, LabelingConfig, svc_cluster
from .metrics import anmi, contingency, nmi
from .svc_core import SolverConfig, SphereModel, solve_wolfe_dual

__all__ = [
    "EDSVC",
    "Ensemble",
    "EstimationResult",
    "KMeansConfig",
    "Labeling",
    "LabelingConfig",
    "SolverConfig",
    "SphereModel",
    "SupportVectorClustering",
    "anmi",
    "build_c_grid",
    "build_q_grid",
    "contingency",
    "edsvc",
    "generate_ensemble",
    "kmeans",
    "load_csv",
    "nmi",
    "normalize_minmax",
    "pairwise_sq_dists",
    "scan_c",
    "scan_q",
    "solve_wolfe_dual",
    "svc_cluster",
]

__version__ = "0.1.0"
