"""Ensembles of randomly sized k-means partitions.

Each member runs plain Lloyd iterations from k distinct data points drawn
at random, with k itself drawn from {2, ..., floor(N ** (1/3))}.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_data


@dataclass(frozen=True)
class KMeansConfig:
    max_iters: int = 100
    rel_tolerance: float = 1e-6
    empty_cluster_policy: str = "farthest"

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.empty_cluster_policy != "farthest":
            raise ValueError(f"unknown empty_cluster_policy {self.empty_cluster_policy!r}")


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_trace: list = field(repr=False)
    n_iter: int = 0


@dataclass(frozen=True, eq=False)
class Ensemble:
    """``labels`` has one row per member."""

    labels: np.ndarray
    ks: np.ndarray
    seeds: np.ndarray

    @property
    def members(self):
        return list(self.labels)

    def __len__(self):
        return self.labels.shape[0]


def _assign(X, centroids):
    d = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(len(X)), labels]


def _fill_empty(X, labels, point_d, centroids, k):
    """Move each empty centroid onto the point farthest from its own centroid."""
    taken = set()
    for c in range(k):
        if np.any(labels == c):
            continue
        order = np.argsort(-point_d, kind="stable")
        for p in order:
            # never strip a cluster of its last point
            if p not in taken and np.count_nonzero(labels == labels[p]) > 1:
                break
        labels[p] = c
        point_d[p] = 0.0
        centroids[c] = X[p]
        taken.add(p)
    return labels


def kmeans(X, k, seed=None, config=None):
    """Lloyd's algorithm from k distinct random data points.

    Raises ``ValueError`` for ``k > n``. Every cluster is non-empty on return;
    ``inertia_trace`` holds the within-cluster sum of squares after each
    assignment step.
    """
    cfg = config or KMeansConfig()
    X = check_data(X)
    n = X.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centroids = X[rng.choice(n, size=k, replace=False)].copy()
    scale = max(float(np.abs(X).max()), 1.0)

    trace = []
    labels, point_d = _assign(X, centroids)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        labels = _fill_empty(X, labels, point_d, centroids, k)
        new = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        trace.append(float(((X - new[labels]) ** 2).sum()))
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        labels, point_d = _assign(X, centroids)
        if shift < cfg.rel_tolerance * scale:
            break
    # the last reassignment may have emptied a cluster
    labels = _fill_empty(X, labels, point_d, centroids, k)
    return KMeansResult(labels.astype(np.intp), centroids, trace, it)


def k_range(n):
    """Inclusive bounds ``(2, floor(cbrt(n)))`` for the member cluster count."""
    hi = int(np.floor(np.cbrt(n)))
    # cbrt of a perfect cube can land one ulp low
    if (hi + 1) ** 3 <= n:
        hi += 1
    return 2, hi


def generate_ensemble(X, n_members=10, seed=0, config=None):
    """Build ``n_members`` k-means partitions from one master seed.

    Requires at least 8 points so that the cluster-count range is non-empty.
    """
    X = check_data(X)
    n = X.shape[0]
    if n < 8:
        raise ValueError(f"need at least 8 points for an ensemble, got {n}")
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    lo, hi = k_range(n)
    rng = np.random.default_rng(seed)
    ks = rng.integers(lo, hi + 1, size=n_members)
    seeds = rng.integers(0, 2**63 - 1, size=n_members, dtype=np.int64)
    labels = np.stack(
        [kmeans(X, k, int(s), config).labels for k, s in zip(ks, seeds)]
    )
    return Ensemble(labels=labels, ks=ks, seeds=seeds)


def write_ensemble_csv(ensemble, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"member_{m}" for m in range(len(ensemble))])
        w.writerows(ensemble.labels.T.tolist())


def read_ensemble_csv(path):
    """Load member labels written by :func:`write_ensemble_csv`."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = np.asarray(rows[1:], dtype=np.intp).T
    ks = labels.max(axis=1) + 1
    return Ensemble(labels=labels, ks=ks, seeds=np.full(len(labels), -1))
