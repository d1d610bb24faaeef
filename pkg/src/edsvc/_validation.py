"""Input checks shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils.validation import check_array


def check_data(X, min_samples=1):
    """Return ``X`` as a finite 2-D float array with at least ``min_samples`` rows."""
    return check_array(
        X, dtype=np.float64, ensure_2d=True, ensure_min_samples=min_samples
    )


def check_sq_dists(D, n=None):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got shape {D.shape}")
    if n is not None and D.shape[0] != n:
        raise ValueError(f"distance matrix is {D.shape[0]}x{D.shape[0]}, expected {n}")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValueError("distance matrix must be finite and non-negative")
    return D


def check_partition(labels, n=None, name="labels"):
    """1-D integer codes 0..k-1 for an arbitrary label vector."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {labels.shape}")
    if n is not None and labels.shape[0] != n:
        raise ValueError(f"{name} has length {labels.shape[0]}, expected {n}")
    _, codes = np.unique(labels, return_inverse=True)
    return codes.reshape(-1)


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value
