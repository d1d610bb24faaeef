"""Unsupervised choice of the kernel width and trade-off for support vector clustering.

A k-means ensemble stands in for the missing ground truth: every candidate
clustering is scored by its mean NMI against the ensemble members, the width
``q`` is scanned at a fixed ``C0`` and then ``C`` is scanned at the chosen
width. The module exposes the procedure both as plain functions
(:func:`edsvc`) and as scikit-learn compatible estimators.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_data, check_sq_dists
from .data import normalize_minmax, pairwise_sq_dists, pairwise_sq_dists_to
from .ensemble import Ensemble, KMeansConfig, generate_ensemble
from .labeling import LabelingConfig, svc_cluster
from .metrics import anmi
from .svc_core import ConvergenceError, InfeasibleError, SolverConfig, sq_radius_at

log = logging.getLogger(__name__)

FAILED_ANMI = -1.0
SCAN_COLUMNS = (
    "stage",
    "param_value",
    "anmi",
    "n_clusters",
    "n_svs",
    "n_bsvs",
    "solve_residual",
)


class AllCandidatesFailed(RuntimeError):
    """No candidate in a scan produced a clustering."""


@dataclass(frozen=True)
class ScanRecord:
    stage: str
    param_value: float
    anmi: float
    n_clusters: int
    n_svs: int
    n_bsvs: int
    solve_residual: float
    error: str = ""

    def row(self):
        return (
            self.stage,
            repr(float(self.param_value)),
            repr(float(self.anmi)),
            self.n_clusters,
            self.n_svs,
            self.n_bsvs,
            repr(float(self.solve_residual)),
        )


@dataclass(frozen=True, eq=False)
class ParamGrid:
    q_values: np.ndarray
    c_values: np.ndarray
    c_init: float = 1.0


@dataclass(frozen=True, eq=False)
class EstimationResult:
    q_hat: float
    c_hat: float
    q_scan: list
    c_scan: list
    final_labeling: object
    final_anmi: float
    ensemble: Ensemble = None
    grid: ParamGrid = None
    timings: dict = field(default_factory=dict)

    @property
    def labels(self):
        return self.final_labeling.assignments


def mean_nonzero_sq_dist(sq_dists):
    D = check_sq_dists(sq_dists)
    iu = np.triu_indices(D.shape[0], k=1)
    upper = D[iu]
    upper = upper[upper > 0]
    if upper.size == 0:
        raise ValueError("all points coincide; the width grid is undefined")
    return float(upper.mean())


def build_q_grid(sq_dists, n_q=100, span=(0.1, 100.0)):
    """``n_q`` log-spaced widths over ``[span[0], span[1]] / mean squared distance``."""
    D = check_sq_dists(sq_dists)
    if D.shape[0] < 2:
        raise ValueError("need at least two points for a width grid")
    scale = mean_nonzero_sq_dist(D)
    lo, hi = span
    return np.geomspace(lo / scale, hi / scale, int(n_q))


def build_c_grid(n_points, n_c=100):
    """``n_c`` log-spaced trade-offs over ``[1/N, 1]``; each one keeps ``N*C >= 1``."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    return np.geomspace(1.0 / n_points, 1.0, int(n_c))


def evaluate_candidate(
    X, sq_dists, ensemble, q, c_param, stage, solver_config=None, labeling_config=None
):
    """Cluster at ``(q, C)`` and score against ``ensemble``.

    Solver failures become a record with the sentinel ANMI of -1.
    """
    try:
        lab = svc_cluster(X, sq_dists, q, c_param, solver_config, labeling_config)
    except (ConvergenceError, InfeasibleError) as exc:
        log.warning("%s candidate %.6g failed: %s", stage, q if stage == "q" else c_param, exc)
        value = q if stage == "q" else c_param
        return ScanRecord(stage, value, FAILED_ANMI, 0, 0, 0, np.nan, str(exc)), None
    model = lab.model
    record = ScanRecord(
        stage=stage,
        param_value=q if stage == "q" else c_param,
        anmi=anmi(lab.assignments, ensemble),
        n_clusters=lab.n_clusters,
        n_svs=int(model.sv_mask.sum()),
        n_bsvs=int(model.bsv_mask.sum()),
        solve_residual=float(model.kkt_gap),
    )
    return record, lab


def _select(records, prefer):
    scores = np.array([r.anmi for r in records])
    ok = scores > FAILED_ANMI
    if not ok.any():
        raise AllCandidatesFailed(f"every {records[0].stage} candidate failed")
    best = scores[ok].max()
    hits = np.flatnonzero(ok & (scores == best))
    # candidates are scanned in increasing order
    return hits[0] if prefer == "smallest" else hits[-1]


def scan_q(X, sq_dists, ensemble, q_values, c_init=1.0, solver_config=None, labeling_config=None):
    """Score each width at fixed ``c_init``; ties go to the smaller width."""
    records = [
        evaluate_candidate(X, sq_dists, ensemble, q, c_init, "q", solver_config, labeling_config)[0]
        for q in q_values
    ]
    best = _select(records, "smallest")
    return float(q_values[best]), records


def scan_c(X, sq_dists, ensemble, c_values, q_hat, solver_config=None, labeling_config=None):
    """Score each trade-off at width ``q_hat``; ties go to the larger ``C``.

    Also returns the labeling of the selected candidate.
    """
    records, labelings = [], []
    for c in c_values:
        rec, lab = evaluate_candidate(
            X, sq_dists, ensemble, q_hat, c, "c", solver_config, labeling_config
        )
        records.append(rec)
        labelings.append(lab)
    best = _select(records, "largest")
    return float(c_values[best]), records, labelings[best]


def edsvc(
    X,
    n_members=10,
    n_q=100,
    n_c=100,
    c_init=1.0,
    seed=0,
    solver_config=None,
    labeling_config=None,
    kmeans_config=None,
    sq_dists=None,
    ensemble=None,
    q_span=(0.1, 100.0),
):
    """Ensemble-driven support vector clustering of ``X``.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
        Data, used as given (scale it beforehand).
    n_members : int
        Number of k-means partitions in the guiding ensemble.
    n_q, n_c : int
        Grid sizes for the width and trade-off scans.
    c_init : float
        Trade-off held fixed while the width is scanned.
    seed : int
        Master seed; the only source of randomness.
    sq_dists : ndarray, optional
        Precomputed pairwise squared distances of ``X``.
    ensemble : Ensemble, optional
        Reuse an existing ensemble instead of generating one.

    Returns
    -------
    EstimationResult
    """
    X = check_data(X, min_samples=8)
    n = X.shape[0]
    timings = {}
    t0 = time.perf_counter()
    D = pairwise_sq_dists(X) if sq_dists is None else check_sq_dists(sq_dists, n)
    timings["distances"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if ensemble is None:
        ensemble = generate_ensemble(X, n_members, seed, kmeans_config)
    elif ensemble.labels.shape[1] != n:
        raise ValueError("ensemble does not match the number of points")
    timings["ensemble"] = time.perf_counter() - t0

    grid = ParamGrid(build_q_grid(D, n_q, q_span), build_c_grid(n, n_c), float(c_init))

    t0 = time.perf_counter()
    q_hat, q_scan = scan_q(X, D, ensemble, grid.q_values, grid.c_init, solver_config, labeling_config)
    timings["scan_q"] = time.perf_counter() - t0
    log.info("selected q=%.6g", q_hat)

    t0 = time.perf_counter()
    c_hat, c_scan, final = scan_c(X, D, ensemble, grid.c_values, q_hat, solver_config, labeling_config)
    timings["scan_c"] = time.perf_counter() - t0
    log.info("selected C=%.6g", c_hat)

    final_anmi = max(r.anmi for r in c_scan)
    return EstimationResult(
        q_hat=q_hat,
        c_hat=c_hat,
        q_scan=q_scan,
        c_scan=c_scan,
        final_labeling=final,
        final_anmi=final_anmi,
        ensemble=ensemble,
        grid=grid,
        timings=timings,
    )


class _SphereClusterMixin:
    """Fitted-state bookkeeping shared by the two estimators."""

    def _configs(self):
        return (
            SolverConfig(kkt_tolerance=self.kkt_tolerance, max_passes=self.max_passes),
            LabelingConfig(self.n_segment_samples, self.radius_slack),
        )

    def _set_fitted(self, X, lab):
        model = lab.model
        self.X_fit_ = X
        self.model_ = model
        self.labels_ = lab.assignments
        self.n_clusters_ = lab.n_clusters
        self.beta_ = np.asarray(model.beta)
        self.sq_radius_ = model.sq_radius
        self.support_ = np.flatnonzero(model.sv_mask)
        self.bounded_support_ = np.flatnonzero(model.bsv_mask)
        self.n_features_in_ = X.shape[1]

    def _prepare(self, X):
        return check_data(X)

    def sq_radius_function(self, X):
        """Squared feature-space distance of each row of ``X`` to the sphere centre."""
        check_is_fitted(self, "model_")
        X = self._prepare(X)
        return sq_radius_at(self.model_, pairwise_sq_dists_to(self.X_fit_, X))


class SupportVectorClustering(_SphereClusterMixin, ClusterMixin, BaseEstimator):
    """Support vector clustering at fixed kernel width and trade-off.

    Parameters
    ----------
    q : float, default=1.0
        Gaussian kernel width, ``K(x, y) = exp(-q ||x - y||^2)``.
    C : float, default=1.0
        Upper bound on each dual multiplier; ``n_samples * C`` must be >= 1.
        ``C >= 1`` yields no bounded support vectors.
    kkt_tolerance : float, default=1e-6
    max_passes : int, default=10000
    n_segment_samples : int, default=10
        Interior points tested on each segment during labeling.
    radius_slack : float, default=1e-7

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
    n_clusters_ : int
    beta_ : ndarray of shape (n_samples,)
        Dual multipliers.
    sq_radius_ : float
    support_ : ndarray
        Indices of support vectors.
    bounded_support_ : ndarray
        Indices of bounded support vectors.
    """

    def __init__(
        self,
        q=1.0,
        C=1.0,
        kkt_tolerance=1e-6,
        max_passes=10_000,
        n_segment_samples=10,
        radius_slack=1e-7,
    ):
        self.q = q
        self.C = C
        self.kkt_tolerance = kkt_tolerance
        self.max_passes = max_passes
        self.n_segment_samples = n_segment_samples
        self.radius_slack = radius_slack

    def fit(self, X, y=None):
        X = check_data(X)
        solver_cfg, label_cfg = self._configs()
        lab = svc_cluster(X, pairwise_sq_dists(X), self.q, self.C, solver_cfg, label_cfg)
        self._set_fitted(X, lab)
        return self


class EDSVC(_SphereClusterMixin, ClusterMixin, BaseEstimator):
    """Support vector clustering with ensemble-driven parameter selection.

    ``fit`` builds a k-means ensemble, picks ``q`` by maximizing the mean
    NMI against it at ``C = c_init``, then picks ``C`` at that width. Ground
    truth is never consulted; ``y`` is accepted only for API compatibility.

    Parameters
    ----------
    n_members : int, default=10
    n_q, n_c : int, default=100
    c_init : float, default=1.0
    normalize : bool, default=True
        Min-max scale every feature to [0, 1] before anything else.
    random_state : int, default=0
    q_span : tuple of float, default=(0.1, 100.0)
        Width grid bounds relative to the inverse mean squared distance.
    kkt_tolerance, max_passes, n_segment_samples, radius_slack
        As for :class:`SupportVectorClustering`.

    Attributes
    ----------
    q_, C_ : float
        Selected parameters.
    result_ : EstimationResult
    ensemble_ : Ensemble
    """

    def __init__(
        self,
        n_members=10,
        n_q=100,
        n_c=100,
        c_init=1.0,
        normalize=True,
        random_state=0,
        q_span=(0.1, 100.0),
        kkt_tolerance=1e-6,
        max_passes=10_000,
        n_segment_samples=10,
        radius_slack=1e-7,
    ):
        self.n_members = n_members
        self.n_q = n_q
        self.n_c = n_c
        self.c_init = c_init
        self.normalize = normalize
        self.random_state = random_state
        self.q_span = q_span
        self.kkt_tolerance = kkt_tolerance
        self.max_passes = max_passes
        self.n_segment_samples = n_segment_samples
        self.radius_slack = radius_slack

    def fit(self, X, y=None):
        X = check_data(X, min_samples=8)
        if self.normalize:
            self.data_min_ = X.min(axis=0)
            self.data_max_ = X.max(axis=0)
            X = normalize_minmax(X)
        solver_cfg, label_cfg = self._configs()
        result = edsvc(
            X,
            n_members=self.n_members,
            n_q=self.n_q,
            n_c=self.n_c,
            c_init=self.c_init,
            seed=self.random_state,
            solver_config=solver_cfg,
            labeling_config=label_cfg,
            q_span=self.q_span,
        )
        self.result_ = result
        self.ensemble_ = result.ensemble
        self.q_ = result.q_hat
        self.C_ = result.c_hat
        self._set_fitted(X, result.final_labeling)
        return self

    def _prepare(self, X):
        X = check_data(X)
        if not self.normalize:
            return X
        span = self.data_max_ - self.data_min_
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (X - self.data_min_) / safe, 0.0)
