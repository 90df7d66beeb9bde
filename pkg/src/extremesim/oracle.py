"""O(mn) reference implementations for tests and ``oracle-compare``.

Nothing here uses Gramians: every pair is visited explicitly and per-entity
Jacobians are assembled column by column from JVPs on basis vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeGuardError
from .losses import loss_terms
from .net import batch_jvp, forward_batch

MAX_PAIRS = 10_000
MAX_PARAMS = 2_000


def _guard_pairs(data):
    if data.m * data.n > MAX_PAIRS:
        raise SizeGuardError(f"m*n = {data.m * data.n} exceeds oracle limit {MAX_PAIRS}")


def _guard_params(data):
    if data.model.num_params > MAX_PARAMS:
        raise SizeGuardError(
            f"D = {data.model.num_params} exceeds oracle limit {MAX_PARAMS}"
        )


@dataclass
class ExplicitJacobian:
    """``left[i]`` is df_i/dtheta_u (k x D_u); ``right[j]`` is dg_j/dtheta_v."""

    left: np.ndarray  # (m, k, D_u)
    right: np.ndarray  # (n, k, D_v)


def _tower_jacobian(params, tape):
    d = params.spec.num_params
    cols = []
    for t in range(d):
        e = np.zeros(d)
        e[t] = 1.0
        cols.append(batch_jvp(params, tape, e))
    return np.stack(cols, axis=-1)


def explicit_jacobian(theta, data):
    left, right = data.model.split(theta)
    _, lt = forward_batch(left, data.left_features)
    _, rt = forward_batch(right, data.right_features)
    return ExplicitJacobian(_tower_jacobian(left, lt), _tower_jacobian(right, rt))


def _pairwise(theta, data):
    """Dense Yhat, label Y, and the piecewise per-pair loss derivatives."""
    left, right = data.model.split(theta)
    P, _ = forward_batch(left, data.left_features)
    Q, _ = forward_batch(right, data.right_features)
    yhat = P @ Q.T
    # built from indices, not values: an observed R_ij may be 0
    mask = np.zeros(yhat.shape, dtype=bool)
    mask[data.observed.rows, data.observed.cols] = True
    R = np.zeros_like(yhat)
    R[data.observed.rows, data.observed.cols] = data.observed.values
    ytilde = data.p_tilde @ data.q_tilde.T
    wab = data.omega * np.outer(data.a, data.b)
    val, d1, d2 = loss_terms(data.loss, R, yhat)
    val = np.where(mask, val, 0.5 * wab * (ytilde - yhat) ** 2)
    d1 = np.where(mask, d1, wab * (yhat - ytilde))
    d2 = np.where(mask, d2, wab)
    return P, Q, val, d1, d2


def naive_objective(theta, data):
    _guard_pairs(data)
    theta = np.asarray(theta, dtype=np.float64)
    _, _, val, _, _ = _pairwise(theta, data)
    total = 0.0
    for i in range(data.m):
        for j in range(data.n):
            total += val[i, j]
    return total + data.lam * 0.5 * float(theta @ theta)


def _pair_jacobians(P, Q, jac):
    """dYhat_ij/dtheta for all pairs, shape (m, n, D)."""
    ju = np.einsum("jk,ikd->ijd", Q, jac.left)
    jv = np.einsum("ik,jkd->ijd", P, jac.right)
    return np.concatenate([ju, jv], axis=-1)


def naive_gradient(theta, data):
    _guard_pairs(data)
    theta = np.asarray(theta, dtype=np.float64)
    P, Q, _, d1, _ = _pairwise(theta, data)
    J = _pair_jacobians(P, Q, explicit_jacobian(theta, data))
    g = data.lam * theta.copy()
    for i in range(data.m):
        for j in range(data.n):
            g += J[i, j] * d1[i, j]
    return g


def naive_gn_matrix(theta, data):
    """The explicit D x D Gauss-Newton matrix."""
    _guard_pairs(data)
    _guard_params(data)
    theta = np.asarray(theta, dtype=np.float64)
    P, Q, _, _, d2 = _pairwise(theta, data)
    J = _pair_jacobians(P, Q, explicit_jacobian(theta, data))
    D = theta.size
    G = data.lam * np.eye(D)
    for i in range(data.m):
        for j in range(data.n):
            G += d2[i, j] * np.outer(J[i, j], J[i, j])
    return G


def naive_gn_product(theta, d, data):
    return naive_gn_matrix(theta, data) @ np.asarray(d, dtype=np.float64)


def naive_loss_minus(theta, data):
    """0.5 * sum_ij a_i b_j (ytilde_ij - yhat_ij)^2 over every pair."""
    _guard_pairs(data)
    left, right = data.model.split(theta)
    P, _ = forward_batch(left, data.left_features)
    Q, _ = forward_batch(right, data.right_features)
    diff = data.p_tilde @ data.q_tilde.T - P @ Q.T
    return 0.5 * float(np.sum(np.outer(data.a, data.b) * diff * diff))
