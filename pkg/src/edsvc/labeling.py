"""Cluster labeling of a trained sphere.

Two non-outlier points belong to the same cluster when the straight segment
between them stays inside the sphere in feature space, tested at a fixed set
of interior sample points. Clusters are the connected components of that
relation; bounded support vectors are attached to their nearest neighbour
afterwards so that every point receives a label.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _cc

from ._validation import check_data, check_sq_dists
from .data import pairwise_sq_dists
from .svc_core import SolverConfig, solve_wolfe_dual

# bounds the (pairs x samples x support) temporaries to ~32 MB
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class LabelingConfig:
    n_segment_samples: int = 10
    radius_slack: float = 1e-7

    def __post_init__(self):
        if self.n_segment_samples < 1:
            raise ValueError("n_segment_samples must be >= 1")
        if self.radius_slack < 0:
            raise ValueError("radius_slack must be non-negative")

    @property
    def sample_positions(self):
        m = self.n_segment_samples
        return np.arange(1, m + 1) / (m + 1)


@dataclass(frozen=True, eq=False)
class Labeling:
    """A partition of the data into clusters ``0 .. n_clusters - 1``."""

    assignments: np.ndarray
    n_clusters: int
    model: object = None
    all_bsv: bool = False

    def __len__(self):
        return len(self.assignments)


@dataclass(frozen=True, eq=False)
class AdjacencyGraph:
    n_nodes: int
    edges: np.ndarray  # (n_edges, 2), each row i < j in node numbering
    node_index: np.ndarray  # node -> original point index


def _radius_threshold(model, cfg):
    return model.sq_radius * (1.0 + cfg.radius_slack)


def _segments_inside(model, sq_dists, I, J, cfg):
    """Vectorised segment test for the pairs ``(I[p], J[p])``.

    Sample distances come from the distance matrix alone:
    ``|y - x_s|^2 = (1-t) D[i,s] + t D[j,s] - t(1-t) D[i,j]`` for
    ``y = (1-t) x_i + t x_j``. The sample nearest the midpoint is checked
    first since it fails most often.
    """
    I = np.asarray(I, dtype=np.intp)
    J = np.asarray(J, dtype=np.intp)
    inside = np.ones(I.shape[0], dtype=bool)
    if I.size == 0:
        return inside
    support = np.flatnonzero(model.beta > 0)
    beta = model.beta[support]
    thresh = _radius_threshold(model, cfg)
    const = 1.0 + model.self_kernel_term

    t_all = cfg.sample_positions
    order = np.argsort(np.abs(t_all - 0.5), kind="stable")
    stages = [t_all[order[:1]], t_all[order[1:]]]

    live = np.flatnonzero(I != J)
    for ts in stages:
        if live.size == 0 or ts.size == 0:
            break
        per_pair = ts.size * support.size
        step = max(1, _CHUNK_ELEMS // max(per_pair, 1))
        keep = []
        for lo in range(0, live.size, step):
            idx = live[lo : lo + step]
            a = sq_dists[I[idx]][:, support]
            b = sq_dists[J[idx]][:, support]
            dij = sq_dists[I[idx], J[idx]]
            t = ts[None, :, None]
            d = (1.0 - t) * a[:, None, :] + t * b[:, None, :]
            d -= (t * (1.0 - t)) * dij[:, None, None]
            np.maximum(d, 0.0, out=d)
            r2 = const - 2.0 * (np.exp(-model.q * d) @ beta)
            ok = (r2 <= thresh).all(axis=1)
            inside[idx[~ok]] = False
            keep.append(idx[ok])
        live = np.concatenate(keep) if keep else live[:0]
    return inside


def _dists(data, sq_dists):
    if sq_dists is None:
        return pairwise_sq_dists(data)
    return check_sq_dists(sq_dists)


def segment_connected(model, data, i, j, config=None, sq_dists=None):
    """True when every sample on the open segment x_i -> x_j is inside the sphere."""
    cfg = config or LabelingConfig()
    if i == j:
        return True
    D = _dists(data, sq_dists)
    return bool(_segments_inside(model, D, [i], [j], cfg)[0])


def build_adjacency(model, data, config=None, sq_dists=None):
    """Test every pair of non-BSV points; the complete O(n^2 m) edge set."""
    cfg = config or LabelingConfig()
    D = _dists(data, sq_dists)
    nodes = np.flatnonzero(~model.bsv_mask)
    iu, ju = np.triu_indices(nodes.size, k=1)
    ok = _segments_inside(model, D, nodes[iu], nodes[ju], cfg)
    edges = np.column_stack([iu[ok], ju[ok]]).astype(np.intp)
    return AdjacencyGraph(n_nodes=int(nodes.size), edges=edges, node_index=nodes)


def _first_seen_codes(labels):
    """Renumber so that ids appear in order of their smallest member."""
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    _, inv = np.unique(labels, return_inverse=True)
    return remap[inv.reshape(-1)]


def connected_components(graph):
    """Component id per node, numbered by smallest member node."""
    n = graph.n_nodes
    if n == 0:
        return np.zeros(0, dtype=np.intp)
    e = np.asarray(graph.edges, dtype=np.intp).reshape(-1, 2)
    adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = _cc(adj, directed=False)
    return _first_seen_codes(labels)


def assign_bsvs(partial, model, sq_dists):
    """Fill entries marked ``-1`` with the label of the nearest labelled point.

    Ties go to the smaller point index. When no point is labelled at all the
    result is a single cluster and the returned ``all_bsv`` flag is set.
    """
    partial = np.asarray(partial)
    out = partial.astype(np.intp, copy=True)
    missing = np.flatnonzero(out < 0)
    if missing.size == 0:
        return Labeling(out, int(out.max()) + 1 if out.size else 0, model)
    labelled = np.flatnonzero(out >= 0)
    if labelled.size == 0:
        warnings.warn("every point is a bounded support vector", RuntimeWarning)
        return Labeling(np.zeros_like(out), 1, model, all_bsv=True)
    D = check_sq_dists(sq_dists)
    nearest = labelled[np.argmin(D[np.ix_(missing, labelled)], axis=1)]
    out[missing] = out[nearest]
    return Labeling(out, int(out.max()) + 1, model)


def _fast_components(model, D, cfg):
    """Same partition as ``connected_components(build_adjacency(...))``.

    Node ``i`` is tested only against later nodes not yet in its component,
    which changes the edge set but never the reachability relation.
    """
    nodes = np.flatnonzero(~model.bsv_mask)
    comp = np.arange(nodes.size)
    for a in range(nodes.size - 1):
        cand = a + 1 + np.flatnonzero(comp[a + 1 :] != comp[a])
        if cand.size == 0:
            continue
        ok = _segments_inside(model, D, np.full(cand.size, nodes[a]), nodes[cand], cfg)
        hit = cand[ok]
        if hit.size:
            merged = np.union1d(comp[hit], comp[a])
            comp[np.isin(comp, merged)] = comp[a]
    return nodes, _first_seen_codes(comp)


def svc_cluster(data, sq_dists, q, c_param, solver_config=None, labeling_config=None):
    """Support vector clustering of ``data`` at kernel width ``q`` and trade-off ``C``.

    Returns a :class:`Labeling` whose ``model`` attribute holds the sphere.
    """
    X = check_data(data)
    D = check_sq_dists(sq_dists, X.shape[0])
    model = solve_wolfe_dual(D, q, c_param, solver_config or SolverConfig())
    nodes, comp = _fast_components(model, D, labeling_config or LabelingConfig())
    partial = np.full(X.shape[0], -1, dtype=np.intp)
    partial[nodes] = comp
    return assign_bsvs(partial, model, D)
