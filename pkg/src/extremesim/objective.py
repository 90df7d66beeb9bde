"""Objective, gradient and Gauss-Newton products over all m x n pairs.

Every unobserved pair (i, j) contributes ``0.5 * omega * a_i * b_j *
(ytilde_ij - yhat_ij)**2`` with ``ytilde_ij = ptilde_i . qtilde_j``.
Because the weight factorises and both labels are inner products of
per-entity vectors, the sum over all pairs collapses to k x k Gramians:

    L_minus = 0.5 <Pt'APt, Qt'BQt> - <Pt'AP, Qt'BQ> + 0.5 <P'AP, Q'BQ>

and the gradient and Gauss-Newton products follow the same pattern. No
routine here touches more than ``|O|`` individual pairs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NumericError, ValidationError
from .linalg import SparseMatrixDual, frobenius_inner, pair_dots, spmm, weighted_gram
from .losses import LossKind, loss_terms
from .net import TwoTower, batch_jvp, batch_vjp, forward_batch

log = logging.getLogger(__name__)


def _finite(x, stage):
    if not np.all(np.isfinite(x)):
        raise NumericError(stage)
    return x


@dataclass
class ProblemData:
    """Everything that stays fixed while theta is optimised."""

    observed: SparseMatrixDual
    model: TwoTower
    left_features: np.ndarray
    right_features: np.ndarray
    a: np.ndarray
    b: np.ndarray
    p_tilde: np.ndarray
    q_tilde: np.ndarray
    omega: float
    lam: float
    loss: LossKind = LossKind.LOGISTIC
    # derived at construction
    tilde_const: float = field(init=False)
    y_tilde_obs: np.ndarray = field(init=False, repr=False)
    ab_obs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m, n = self.observed.shape
        k = self.model.k
        self.loss = LossKind(self.loss)
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.p_tilde = np.asarray(self.p_tilde, dtype=np.float64)
        self.q_tilde = np.asarray(self.q_tilde, dtype=np.float64)
        if self.a.shape != (m,) or self.b.shape != (n,):
            raise DimensionError("weight vectors must have lengths m and n")
        if np.any(self.a <= 0) or np.any(self.b <= 0):
            raise ValidationError("unobserved-pair weights a_i, b_j must be positive")
        if self.p_tilde.shape != (m, k) or self.q_tilde.shape != (n, k):
            raise DimensionError(f"imputation matrices must be ({m}, {k}) and ({n}, {k})")
        if len(self.left_features) != m or len(self.right_features) != n:
            raise DimensionError("feature batches must cover all m left and n right entities")
        if self.omega < 0 or self.lam < 0:
            raise ValidationError("omega and lambda must be non-negative")
        if self.lam == 0:
            log.warning("lambda = 0: the Gauss-Newton matrix is only positive semidefinite")
        obs = self.observed
        self.ab_obs = self.a[obs.rows] * self.b[obs.cols]
        self.y_tilde_obs = pair_dots(self.p_tilde, self.q_tilde, obs.rows, obs.cols)
        self.tilde_const = frobenius_inner(
            weighted_gram(self.p_tilde, self.a, self.p_tilde),
            weighted_gram(self.q_tilde, self.b, self.q_tilde),
        )

    @property
    def m(self):
        return self.observed.shape[0]

    @property
    def n(self):
        return self.observed.shape[1]

    @property
    def k(self):
        return self.model.k


@dataclass
class GramianCache:
    """Quantities computed by ``objective`` and reused at the same theta."""

    theta: np.ndarray
    left_params: object
    right_params: object
    P: np.ndarray
    Q: np.ndarray
    left_tape: object
    right_tape: object
    Pc: np.ndarray
    Qc: np.ndarray
    Phat: np.ndarray
    Qhat: np.ndarray
    yhat_obs: np.ndarray
    dloss_obs: np.ndarray  # d l+_ij / d yhat on O
    d2loss_obs: np.ndarray  # d2 l+_ij / d yhat2 on O
    value: float
    loss_plus: float
    loss_minus: float
    regularizer: float

    def valid_for(self, theta):
        return self.theta is theta or np.array_equal(self.theta, theta)


def observed_terms(data, yhat, positions=None):
    """Value, first and second derivative of l+_ij on observed pairs.

    ``positions`` selects pairs by their row-major index into
    ``data.observed``; ``yhat`` must be aligned with that selection.
    """
    obs = data.observed
    if positions is None:
        r, ytilde, ab = obs.values, data.y_tilde_obs, data.ab_obs
    else:
        r, ytilde, ab = obs.values[positions], data.y_tilde_obs[positions], data.ab_obs[positions]
    val, d1, d2 = loss_terms(data.loss, r, yhat)
    resid = ytilde - yhat
    w = data.omega * ab
    val_plus = val - 0.5 * w * resid * resid
    d1_plus = d1 + w * resid
    d2_plus = d2 - w
    return val_plus, d1_plus, d2_plus


def objective(theta, data):
    """Return ``(L(theta), cache)``."""
    theta = np.asarray(theta, dtype=np.float64)
    left, right = data.model.split(theta)
    P, left_tape = forward_batch(left, data.left_features)
    Q, right_tape = forward_batch(right, data.right_features)
    _finite(P, "left tower forward")
    _finite(Q, "right tower forward")

    Pc = weighted_gram(P, data.a, P)
    Qc = weighted_gram(Q, data.b, Q)
    Phat = weighted_gram(P, data.a, data.p_tilde)
    Qhat = weighted_gram(Q, data.b, data.q_tilde)

    obs = data.observed
    yhat = pair_dots(P, Q, obs.rows, obs.cols)
    val_plus, d1_plus, d2_plus = observed_terms(data, yhat)
    loss_plus = float(np.sum(val_plus))
    loss_minus = 0.5 * data.tilde_const - frobenius_inner(Phat, Qhat) + 0.5 * frobenius_inner(Pc, Qc)
    reg = 0.5 * float(theta @ theta)
    value = loss_plus + data.omega * loss_minus + data.lam * reg
    _finite(loss_plus, "observed-pair loss")
    _finite(loss_minus, "unobserved-pair loss")
    _finite(value, "objective")

    frozen = theta.copy()
    frozen.flags.writeable = False
    cache = GramianCache(
        theta=frozen,
        left_params=left,
        right_params=right,
        P=P,
        Q=Q,
        left_tape=left_tape,
        right_tape=right_tape,
        Pc=Pc,
        Qc=Qc,
        Phat=Phat,
        Qhat=Qhat,
        yhat_obs=yhat,
        dloss_obs=d1_plus,
        d2loss_obs=d2_plus,
        value=value,
        loss_plus=loss_plus,
        loss_minus=loss_minus,
        regularizer=reg,
    )
    return value, cache


def _ensure_cache(theta, data, cache):
    if cache is None or not cache.valid_for(theta):
        if cache is not None:
            log.debug("Gramian cache is stale; recomputing")
        _, cache = objective(theta, data)
    return cache


def gradient(theta, data, cache=None):
    """Full gradient of L at theta; ``cache`` is recomputed if stale."""
    theta = np.asarray(theta, dtype=np.float64)
    c = _ensure_cache(theta, data, cache)
    X = data.observed.with_values(c.dloss_obs)
    w = data.omega
    left_cot = spmm(X, c.Q) + w * (data.a[:, None] * (c.P @ c.Qc - data.p_tilde @ c.Qhat))
    right_cot = spmm(X, c.P, transposed=True) + w * (
        data.b[:, None] * (c.Q @ c.Pc - data.q_tilde @ c.Phat)
    )
    g = np.concatenate(
        [
            batch_vjp(c.left_params, c.left_tape, left_cot),
            batch_vjp(c.right_params, c.right_tape, right_cot),
        ]
    )
    g += data.lam * theta
    return _finite(g, "gradient")


def gn_product(theta, d, data, cache=None):
    """Gauss-Newton matrix-vector product ``G d`` at theta."""
    theta = np.asarray(theta, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if d.shape != theta.shape:
        raise DimensionError("direction must have the same length as theta")
    c = _ensure_cache(theta, data, cache)
    du, dv = d[: data.model.d_left], d[data.model.d_left :]
    W = batch_jvp(c.left_params, c.left_tape, du)
    H = batch_jvp(c.right_params, c.right_tape, dv)
    Wc = weighted_gram(c.P, data.a, W)
    Hc = weighted_gram(c.Q, data.b, H)
    obs = data.observed
    jd = pair_dots(W, c.Q, obs.rows, obs.cols) + pair_dots(c.P, H, obs.rows, obs.cols)
    Z = obs.with_values(c.d2loss_obs * jd)
    w = data.omega
    left_cot = spmm(Z, c.Q) + w * (data.a[:, None] * (W @ c.Qc + c.P @ Hc))
    right_cot = spmm(Z, c.P, transposed=True) + w * (data.b[:, None] * (H @ c.Pc + c.Q @ Wc))
    gd = np.concatenate(
        [
            batch_vjp(c.left_params, c.left_tape, left_cot),
            batch_vjp(c.right_params, c.right_tape, right_cot),
        ]
    )
    gd += data.lam * d
    return _finite(gd, "Gauss-Newton product")


class PairwiseProblem:
    """Bundles ``data`` with the three evaluators for the optimisers.

    Any object exposing ``objective(theta)``, ``gradient(theta, cache)``
    and ``gn_product(theta, d, cache)`` can stand in for it.
    """

    def __init__(self, data):
        self.data = data

    @property
    def num_params(self):
        return self.data.model.num_params

    def objective(self, theta):
        return objective(theta, self.data)

    def gradient(self, theta, cache=None):
        return gradient(theta, self.data, cache)

    def gn_product(self, theta, d, cache=None):
        return gn_product(theta, d, self.data, cache)
