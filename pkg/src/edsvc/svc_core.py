"""Smallest enclosing sphere in Gaussian-kernel feature space.

The sphere is found through its Wolfe dual

    maximize    W(beta) = sum_i K_ii beta_i - sum_ij beta_i beta_j K_ij
    subject to  sum_i beta_i = 1,  0 <= beta_i <= C

With a Gaussian kernel K_ii = 1, so W = 1 - beta' K beta and the solver
minimizes the quadratic form over the capped simplex with pairwise (SMO)
updates. Squared feature-space distance from a point x to the sphere centre is

    R2(x) = 1 - 2 sum_j beta_j K(x_j, x) + beta' K beta
"""

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from ._validation import check_positive, check_sq_dists

# smallest curvature accepted for a pair update; duplicate points have 0
_TAU = 1e-12


class Role(IntEnum):
    INTERIOR = 0
    SV = 1
    BSV = 2


class InfeasibleError(ValueError):
    """The capped simplex is empty because N * C < 1."""


class ConvergenceError(RuntimeError):
    """The solver hit its iteration budget before meeting the KKT tolerance.

    The best iterate is kept on ``model`` for inspection.
    """

    def __init__(self, message, model):
        super().__init__(message)
        self.model = model


@dataclass(frozen=True)
class SolverConfig:
    kkt_tolerance: float = 1e-6
    max_passes: int = 10_000
    beta_boundary_epsilon: float = 1e-8

    def __post_init__(self):
        if self.kkt_tolerance <= 0:
            raise ValueError("kkt_tolerance must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.beta_boundary_epsilon < 0:
            raise ValueError("beta_boundary_epsilon must be non-negative")


@dataclass(frozen=True, eq=False)
class SphereModel:
    """A dual solution together with the quantities derived from it."""

    beta: np.ndarray
    q: float
    c_param: float
    sq_radius: float
    dual_objective: float
    self_kernel_term: float
    roles: np.ndarray
    epsilon: float = 1e-8
    n_iter: int = 0
    kkt_gap: float = 0.0
    objective_trace: tuple = field(default=(), repr=False)

    @property
    def n_points(self):
        return self.beta.shape[0]

    @property
    def sv_mask(self):
        return self.roles == Role.SV

    @property
    def bsv_mask(self):
        return self.roles == Role.BSV

    @classmethod
    def from_beta(cls, beta, sq_dists, q, c_param, epsilon=1e-8, **extra):
        """Derive roles, radius and objective for an arbitrary feasible ``beta``."""
        beta = np.array(beta, dtype=float)
        K = kernel_matrix(sq_dists, q)
        Kb = K @ beta
        s = float(beta @ Kb)
        roles = classify_roles(beta, c_param, epsilon)
        point_r2 = np.maximum(1.0 - 2.0 * Kb + s, 0.0)
        r2 = _mean_sv_radius(point_r2, beta, roles, c_param, epsilon)
        beta.setflags(write=False)
        roles.setflags(write=False)
        return cls(
            beta=beta,
            q=float(q),
            c_param=float(c_param),
            sq_radius=r2,
            dual_objective=1.0 - s,
            self_kernel_term=s,
            roles=roles,
            epsilon=float(epsilon),
            **extra,
        )


def gaussian_kernel(sq_dist, q):
    """``exp(-q * sq_dist)``; works elementwise on arrays."""
    return np.exp(-q * np.asarray(sq_dist, dtype=float))


def kernel_matrix(sq_dists, q):
    K = gaussian_kernel(sq_dists, q)
    np.fill_diagonal(K, 1.0)
    return K


def classify_roles(beta, c_param, epsilon):
    """SV for beta strictly inside (eps, C - eps), BSV at the cap.

    With C >= 1 the cap can only be reached by a lone point, which sits on
    the sphere rather than outside it, so no BSVs are reported.
    """
    beta = np.asarray(beta)
    roles = np.full(beta.shape, Role.INTERIOR, dtype=np.int8)
    upper = c_param - epsilon
    if c_param < 1.0:
        roles[beta >= upper] = Role.BSV
        roles[(beta > epsilon) & (beta < upper)] = Role.SV
    else:
        roles[beta > epsilon] = Role.SV
    return roles


def _mean_sv_radius(point_r2, beta, roles, c_param, epsilon):
    sv = roles == Role.SV
    if sv.any():
        return float(point_r2[sv].mean())
    # no point strictly inside the box: take the beta nearest to it
    lo, hi = epsilon, c_param - epsilon
    dist = np.maximum(lo - beta, 0.0) + np.maximum(beta - hi, 0.0)
    return float(point_r2[int(np.argmin(dist))])


def solve_wolfe_dual(sq_dists, q, c_param, config=None, record_trace=False):
    """Solve the sphere dual for kernel width ``q`` and trade-off ``c_param``.

    Parameters
    ----------
    sq_dists : ndarray of shape (n, n)
        Pairwise squared Euclidean distances.
    q : float
        Gaussian kernel width, ``K = exp(-q * d^2)``.
    c_param : float
        Upper bound on each multiplier. ``n * c_param`` must be at least 1.
    config : SolverConfig, optional
    record_trace : bool
        Store the dual objective after every block of ``n`` pair updates on
        ``model.objective_trace``.

    Returns
    -------
    SphereModel

    Raises
    ------
    InfeasibleError
        If ``n * c_param < 1``.
    ConvergenceError
        If ``max_passes * n`` pair updates do not reach the KKT tolerance.
    """
    cfg = config or SolverConfig()
    D = check_sq_dists(sq_dists)
    q = check_positive(q, "q")
    C = check_positive(c_param, "c_param")
    n = D.shape[0]
    if n * C < 1.0 - 1e-12:
        raise InfeasibleError(f"n * C = {n * C:.6g} < 1: no feasible multipliers")
    # absorb rounding in C == 1/n so that the uniform start is feasible
    cap = max(C, 1.0 / n)

    K = kernel_matrix(D, q)
    beta = np.full(n, 1.0 / n)
    grad = 2.0 * (K @ beta)
    # pairwise gaps of grad equal gaps of R2, stop with margin for the mean radius
    stop = 0.5 * cfg.kkt_tolerance
    max_iter = cfg.max_passes * n
    trace = [1.0 - float(beta @ K @ beta)] if record_trace else None

    it = 0
    gap = 0.0
    while True:
        up = beta < cap
        low = beta > 0.0
        if not up.any() or not low.any():
            gap = 0.0
            break
        g_up = np.where(up, grad, np.inf)
        i = int(np.argmin(g_up))
        g_low = np.where(low, grad, -np.inf)
        gap = float(g_low.max() - grad[i])
        if gap <= stop:
            break
        if it >= max_iter:
            model = _finish(beta, D, q, C, cfg, it, gap, trace)
            raise ConvergenceError(
                f"no KKT point after {it} updates (gap {gap:.3g})", model
            )

        # second-order working set choice for the partner j
        diff = g_low - grad[i]
        eta = np.maximum(2.0 - 2.0 * K[i], _TAU)
        score = np.where(diff > 0, diff * diff / eta, -np.inf)
        j = int(np.argmax(score))

        delta = (grad[j] - grad[i]) / (2.0 * eta[j])
        room_i = cap - beta[i]
        room_j = beta[j]
        if delta >= room_i or delta >= room_j:
            if room_i <= room_j:
                delta = room_i
                beta[i] = cap
                beta[j] -= delta
            else:
                delta = room_j
                beta[i] += delta
                beta[j] = 0.0
        else:
            beta[i] += delta
            beta[j] -= delta
        grad += 2.0 * delta * (K[:, i] - K[:, j])
        it += 1

        if it % n == 0:
            # drift control
            grad = 2.0 * (K @ beta)
            if trace is not None:
                trace.append(1.0 - float(beta @ K @ beta))

    return _finish(beta, D, q, C, cfg, it, gap, trace)


def _finish(beta, D, q, C, cfg, it, gap, trace):
    beta = np.clip(beta, 0.0, max(C, 1.0 / len(beta)))
    extra = dict(n_iter=it, kkt_gap=gap)
    if trace is not None:
        K = kernel_matrix(D, q)
        trace.append(1.0 - float(beta @ K @ beta))
        extra["objective_trace"] = tuple(trace)
    return SphereModel.from_beta(beta, D, q, C, cfg.beta_boundary_epsilon, **extra)


def sq_radius_at(model, dists_to_point):
    """Squared feature-space distance from a point to the sphere centre.

    ``dists_to_point`` holds squared input-space distances from the point to
    every training point, shape ``(n,)``; a 2-D array of shape ``(m, n)``
    evaluates ``m`` points at once.
    """
    d = np.asarray(dists_to_point, dtype=float)
    r2 = 1.0 - 2.0 * (gaussian_kernel(d, model.q) @ model.beta) + model.self_kernel_term
    return np.maximum(r2, 0.0) if d.ndim > 1 else max(float(r2), 0.0)


def training_sq_radii(model, sq_dists):
    """R2 at every training point."""
    K = kernel_matrix(sq_dists, model.q)
    return np.maximum(1.0 - 2.0 * (K @ model.beta) + model.self_kernel_term, 0.0)


def sphere_sq_radius(model, sq_dists):
    """Mean of R2 over the support vectors (recomputed from ``sq_dists``)."""
    return _mean_sv_radius(
        training_sq_radii(model, sq_dists),
        model.beta,
        model.roles,
        model.c_param,
        model.epsilon,
    )


def kkt_residual(model, sq_dists):
    """Largest violation of the role-dependent radius conditions.

    Interior points must lie inside the sphere, SVs on it and BSVs outside;
    a perfect KKT point scores 0.
    """
    r2 = training_sq_radii(model, sq_dists)
    R2 = model.sq_radius
    viol = np.where(
        model.roles == Role.SV,
        np.abs(r2 - R2),
        np.where(model.roles == Role.BSV, R2 - r2, r2 - R2),
    )
    return float(max(viol.max(), 0.0))
