"""Dataset loading, feature scaling and the shared squared-distance matrix."""

import csv
import hashlib
import struct
from pathlib import Path

import numpy as np

from ._validation import check_data

DIST_CACHE_MAGIC = b"EDSVCSQD"


class DataFormatError(ValueError):
    """Raised when a data file cannot be parsed into a feature matrix."""


def _resolve_column(column, n_cols, row_no):
    if column is None:
        return None
    if column == "last":
        return n_cols - 1
    if column == "first":
        return 0
    idx = int(column)
    if idx < 0:
        idx += n_cols
    if not 0 <= idx < n_cols:
        raise DataFormatError(
            f"row {row_no}: label column {column} out of range for {n_cols} columns"
        )
    return idx


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column=None):
    """Read a comma-separated numeric table.

    Parameters
    ----------
    path : str or Path
        CSV file. A single header row is skipped when none of its cells
        parses as a number.
    label_column : {None, "first", "last"} or int
        Column holding class labels (0-based, negative counts from the end).
        It is split off and returned as a string array.

    Returns
    -------
    X : ndarray of shape (n_samples, n_features)
    labels : ndarray of str or None

    Errors name 1-based row and column numbers of the offending cell.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    first_data = 0
    if not any(_is_number(c) for c in rows[0]):
        first_data = 1
    if first_data >= len(rows):
        raise DataFormatError(f"{path}: header only, no data rows")

    n_cols = len(rows[first_data])
    label_idx = _resolve_column(label_column, n_cols, first_data + 1)
    feats, labels = [], []
    for r, row in enumerate(rows[first_data:], start=first_data + 1):
        if len(row) != n_cols:
            raise DataFormatError(
                f"row {r}: expected {n_cols} columns, found {len(row)}"
            )
        values = []
        for c, cell in enumerate(row):
            if c == label_idx:
                labels.append(cell.strip())
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"row {r}, column {c + 1}: non-numeric value {cell!r}"
                ) from None
            if not np.isfinite(v):
                raise DataFormatError(f"row {r}, column {c + 1}: non-finite value")
            values.append(v)
        feats.append(values)

    X = np.asarray(feats, dtype=float)
    if X.shape[1] == 0:
        raise DataFormatError(f"{path}: no feature columns")
    y = np.asarray(labels) if label_idx is not None else None
    return X, y


def normalize_minmax(X):
    """Map every column affinely onto [0, 1]; constant columns become 0."""
    X = check_data(X)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    nz = span > 0
    out[:, nz] = (X[:, nz] - lo[nz]) / span[nz]
    # guard against 1 + ulp from the division
    return np.clip(out, 0.0, 1.0)


def pairwise_sq_dists(X):
    """Squared Euclidean distances, exactly symmetric with a zero diagonal."""
    X = check_data(X)
    n, d = X.shape
    D = np.empty((n, n))
    step = max(1, 2**22 // max(1, n * d))
    for lo in range(0, n, step):
        diff = X[lo : lo + step, None, :] - X[None, :, :]
        D[lo : lo + step] = (diff * diff).sum(axis=-1)
    D = np.triu(D, 1)
    return D + D.T


def pairwise_sq_dists_to(X, Y):
    """Squared distances from each row of ``Y`` to each row of ``X``."""
    diff = np.asarray(Y, dtype=float)[:, None, :] - np.asarray(X, dtype=float)[None]
    return (diff * diff).sum(axis=-1)


def content_hash(X):
    X = np.ascontiguousarray(X, dtype="<f8")
    h = hashlib.sha256(struct.pack("<QQ", *X.shape))
    h.update(X.tobytes())
    return h.hexdigest()


def dist_cache_path(source_path, X):
    """Sidecar path next to ``source_path`` keyed by the hash of ``X``."""
    source_path = Path(source_path)
    return source_path.with_name(f"{source_path.name}.{content_hash(X)[:16]}.sqd")


def save_dist_cache(D, path):
    """Write ``D`` as magic, uint64 N, then N*N little-endian float64."""
    D = np.ascontiguousarray(D, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(DIST_CACHE_MAGIC)
        fh.write(struct.pack("<Q", D.shape[0]))
        fh.write(D.tobytes(order="C"))


def load_dist_cache(path):
    raw = Path(path).read_bytes()
    head = len(DIST_CACHE_MAGIC)
    if raw[:head] != DIST_CACHE_MAGIC:
        raise DataFormatError(f"{path}: not a distance cache file")
    (n,) = struct.unpack("<Q", raw[head : head + 8])
    body = raw[head + 8 :]
    if len(body) != 8 * n * n:
        raise DataFormatError(f"{path}: truncated distance cache")
    return np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)


def cached_sq_dists(X, source_path):
    """Distance matrix for ``X`` loaded from or stored next to ``source_path``."""
    cache = dist_cache_path(source_path, X)
    if cache.exists():
        try:
            D = load_dist_cache(cache)
        except DataFormatError:
            D = None
        if D is not None and D.shape[0] == len(X):
            return D
    D = pairwise_sq_dists(X)
    save_dist_cache(D, cache)
    return D
