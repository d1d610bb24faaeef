"""Normalized mutual information between partitions and its ensemble average."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_partition


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    counts: np.ndarray

    @property
    def row_sums(self):
        return self.counts.sum(axis=1)

    @property
    def col_sums(self):
        return self.counts.sum(axis=0)

    @property
    def total(self):
        return int(self.counts.sum())


def contingency(a, b):
    """Co-occurrence counts of cluster ids; rows follow sorted ids of ``a``."""
    a = check_partition(a, name="a")
    b = check_partition(b, a.shape[0], name="b")
    ka, kb = (a.max() + 1, b.max() + 1) if a.size else (0, 0)
    counts = np.bincount(a * kb + b, minlength=ka * kb).reshape(ka, kb)
    return ContingencyTable(counts)


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a, b):
    """NMI with geometric-mean normalization, ``I(a, b) / sqrt(H(a) H(b))``.

    Returns 1 for identical partitions (including two single-cluster
    partitions) and 0 whenever one side has zero entropy otherwise.
    """
    table = contingency(a, b)
    n = table.total
    if n == 0:
        raise ValueError("empty partitions")
    counts = table.counts
    rows, cols = table.row_sums, table.col_sums
    h_a, h_b = _entropy(rows, n), _entropy(cols, n)
    if h_a == 0.0 or h_b == 0.0:
        same = counts.shape[0] == counts.shape[1] and np.count_nonzero(counts) == counts.shape[0]
        return 1.0 if same else 0.0
    nz = counts > 0
    pij = counts[nz] / n
    outer = np.outer(rows, cols)[nz] / (n * n)
    mi = float((pij * np.log(pij / outer)).sum())
    return float(np.clip(mi / np.sqrt(h_a * h_b), 0.0, 1.0))


def anmi(candidate, ensemble):
    """Mean NMI between ``candidate`` and each ensemble member.

    ``ensemble`` is an :class:`~edsvc.ensemble.Ensemble` or any sequence of
    label vectors.
    """
    members = getattr(ensemble, "labels", ensemble)
    members = list(members)
    if not members:
        raise ValueError("empty ensemble")
    candidate = check_partition(candidate, name="candidate")
    return float(np.mean([nmi(m, candidate) for m in members]))
