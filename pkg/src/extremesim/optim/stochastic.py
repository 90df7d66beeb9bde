"""Subsampled gradient estimators.

Block sampling draws row and column subsets and rescales the gradient of
the loss restricted to their cross product by ``mn / (m_hat n_hat)``.

The doubly-subsampled estimator rewrites the all-pairs weight sum as a
sum over two copies of the observed set, with ``abar_i = a_i / |O_i,:|``
and ``bbar_j = b_j / |O_:,j|``. Gramians come from one batch of observed
pairs and the outer sum runs over another. SOGram keeps exponentially
averaged copies of the batch Gramians instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ValidationError
from ..linalg import pair_dots, weighted_gram
from ..net import batch_vjp, forward_batch
from ..objective import observed_terms

SG_MODES = ("block", "doubly", "sogram")


@dataclass
class SgConfig:
    mode: str = "doubly"
    rho: float = 0.01
    alpha: float = 0.1
    step_size: Optional[float] = None  # None: method default

    def __post_init__(self):
        if self.mode not in SG_MODES:
            raise ValueError(f"unknown SG mode {self.mode!r}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError("rho must lie in (0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")


def sample_block(rng, m, n, rho):
    """Sorted row and column subsets of sizes ceil(rho*m), ceil(rho*n)."""
    mh = max(1, math.ceil(rho * m))
    nh = max(1, math.ceil(rho * n))
    rows = np.sort(rng.choice(m, size=mh, replace=False))
    cols = np.sort(rng.choice(n, size=nh, replace=False))
    return rows, cols


def sample_pairs(rng, nnz, rho):
    """Positions of ceil(rho*nnz) observed pairs, without replacement."""
    size = max(1, math.ceil(rho * nnz))
    return np.sort(rng.choice(nnz, size=size, replace=False))


def block_steps_per_pass(m, n, rho):
    mh = max(1, math.ceil(rho * m))
    nh = max(1, math.ceil(rho * n))
    return math.ceil(m * n / (mh * nh))


def doubly_steps_per_pass(nnz, rho):
    size = max(1, math.ceil(rho * nnz))
    return math.ceil(nnz * nnz / (size * size))


def _as_index(idx, bound, what):
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValidationError(f"empty {what} sample")
    if idx.min() < 0 or idx.max() >= bound:
        raise ValidationError(f"{what} sample out of range")
    return idx


class _SubsetForward:
    """Tower outputs and tapes for a subset of left and right entities."""

    def __init__(self, theta, data, rows, cols):
        self.theta = np.asarray(theta, dtype=np.float64)
        self.data = data
        self.rows = np.unique(rows)
        self.cols = np.unique(cols)
        self.left, self.right = data.model.split(self.theta)
        self.P, self.left_tape = forward_batch(self.left, data.left_features[self.rows])
        self.Q, self.right_tape = forward_batch(self.right, data.right_features[self.cols])

    def local_rows(self, i):
        return np.searchsorted(self.rows, i)

    def local_cols(self, j):
        return np.searchsorted(self.cols, j)

    def pull_back(self, left_cot, right_cot):
        g = np.concatenate(
            [
                batch_vjp(self.left, self.left_tape, left_cot),
                batch_vjp(self.right, self.right_tape, right_cot),
            ]
        )
        g += self.data.lam * self.theta
        return g


def sg_block_gradient(theta, data, rows_sel, cols_sel):
    """Unbiased gradient estimate from the block ``rows_sel x cols_sel``.

    Every pair of the block, observed or not, is counted with the factor
    ``mn / (m_hat n_hat)``, the inverse of its inclusion probability when
    the two subsets are drawn uniformly without replacement.
    """
    m, n = data.m, data.n
    rows_sel = np.unique(_as_index(rows_sel, m, "row"))
    cols_sel = np.unique(_as_index(cols_sel, n, "column"))
    fw = _SubsetForward(theta, data, rows_sel, cols_sel)
    scale = (m * n) / (rows_sel.size * cols_sel.size)

    obs = data.observed
    pos = obs.row_positions(rows_sel)
    in_cols = np.zeros(n, dtype=bool)
    in_cols[cols_sel] = True
    pos = pos[in_cols[obs.cols[pos]]]
    li = fw.local_rows(obs.rows[pos])
    lj = fw.local_cols(obs.cols[pos])
    yhat = pair_dots(fw.P, fw.Q, li, lj)
    _, x, _ = observed_terms(data, yhat, pos)

    a = data.a[rows_sel]
    b = data.b[cols_sel]
    pt = data.p_tilde[rows_sel]
    qt = data.q_tilde[cols_sel]
    Pc = weighted_gram(fw.P, a, fw.P)
    Qc = weighted_gram(fw.Q, b, fw.Q)
    Phat = weighted_gram(fw.P, a, pt)
    Qhat = weighted_gram(fw.Q, b, qt)

    w = data.omega
    left_cot = np.zeros_like(fw.P)
    right_cot = np.zeros_like(fw.Q)
    np.add.at(left_cot, li, x[:, None] * fw.Q[lj])
    np.add.at(right_cot, lj, x[:, None] * fw.P[li])
    left_cot += w * (a[:, None] * (fw.P @ Qc - pt @ Qhat))
    right_cot += w * (b[:, None] * (fw.Q @ Pc - qt @ Phat))
    return fw.pull_back(scale * left_cot, scale * right_cot)


@dataclass
class BatchGramians:
    """The four k x k Gramians estimated from one batch of observed pairs."""

    P: np.ndarray
    Q: np.ndarray
    Phat: np.ndarray
    Qhat: np.ndarray


def _reweights(data):
    rc = data.observed.row_counts()
    cc = data.observed.col_counts()
    # rows or columns without observations never appear in a batch
    abar = np.divide(data.a, rc, out=np.zeros(data.m), where=rc > 0)
    bbar = np.divide(data.b, cc, out=np.zeros(data.n), where=cc > 0)
    return abar, bbar


class _PairBatchContext:
    """Shared forward pass over every entity touched by the given batches."""

    def __init__(self, theta, data, batches):
        obs = data.observed
        self.data = data
        self.batches = [_as_index(o, obs.nnz, "observed-pair") for o in batches]
        rows = np.concatenate([obs.rows[o] for o in self.batches])
        cols = np.concatenate([obs.cols[o] for o in self.batches])
        self.fw = _SubsetForward(theta, data, rows, cols)
        self.abar, self.bbar = _reweights(data)

    def gramians(self, o):
        data, fw, obs = self.data, self.fw, self.data.observed
        scale = obs.nnz / o.size
        ur, rcnt = np.unique(obs.rows[o], return_counts=True)
        uc, ccnt = np.unique(obs.cols[o], return_counts=True)
        Pr = fw.P[fw.local_rows(ur)]
        Qr = fw.Q[fw.local_cols(uc)]
        wa = scale * rcnt * self.abar[ur]
        wb = scale * ccnt * self.bbar[uc]
        return BatchGramians(
            P=weighted_gram(Pr, wa, Pr),
            Q=weighted_gram(Qr, wb, Qr),
            Phat=weighted_gram(Pr, wa, data.p_tilde[ur]),
            Qhat=weighted_gram(Qr, wb, data.q_tilde[uc]),
        )

    def cotangents(self, o, gram):
        """Scaled left/right cotangents of the outer sum over batch ``o``."""
        data, fw, obs = self.data, self.fw, self.data.observed
        scale = obs.nnz / o.size
        li = fw.local_rows(obs.rows[o])
        lj = fw.local_cols(obs.cols[o])
        yhat = pair_dots(fw.P, fw.Q, li, lj)
        _, x, _ = observed_terms(data, yhat, o)
        w = data.omega
        ri, cj = obs.rows[o], obs.cols[o]
        left_cot = np.zeros_like(fw.P)
        right_cot = np.zeros_like(fw.Q)
        ua = self.abar[ri][:, None]
        ub = self.bbar[cj][:, None]
        Pi, Qj = fw.P[li], fw.Q[lj]
        np.add.at(left_cot, li, x[:, None] * Qj + w * ua * (Pi @ gram.Q - data.p_tilde[ri] @ gram.Qhat))
        np.add.at(right_cot, lj, x[:, None] * Pi + w * ub * (Qj @ gram.P - data.q_tilde[cj] @ gram.Phat))
        return scale * left_cot, scale * right_cot

    def one_sided(self, o1, o2):
        return self.fw.pull_back(*self.cotangents(o1, self.gramians(o2)))


def sg_doubly_one_sided(theta, data, o1, o2):
    """Outer sum over ``o1`` with Gramians estimated from ``o2``."""
    ctx = _PairBatchContext(theta, data, [o1, o2])
    return ctx.one_sided(*ctx.batches)


def sg_doubly_gradient(theta, data, o1, o2):
    """Average of the two one-sided estimates with the batch roles swapped."""
    ctx = _PairBatchContext(theta, data, [o1, o2])
    b1, b2 = ctx.batches
    l12, r12 = ctx.cotangents(b1, ctx.gramians(b2))
    l21, r21 = ctx.cotangents(b2, ctx.gramians(b1))
    return ctx.fw.pull_back(0.5 * (l12 + l21), 0.5 * (r12 + r21))


def doubly_target_gradient(theta, data):
    """What the doubly-subsampled estimator is unbiased for.

    Both batches equal to the full observed set. It coincides with the
    exact gradient when every row and column has an observation; pairs in
    empty rows or columns are otherwise dropped by the reweighting.
    """
    full = np.arange(data.observed.nnz)
    return sg_doubly_one_sided(theta, data, full, full)


class SOGramState:
    """Exponentially averaged batch Gramians, zero at start."""

    def __init__(self, k, alpha=0.1):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.alpha = alpha
        self.gram = BatchGramians(*(np.zeros((k, k)) for _ in range(4)))

    def update(self, batch):
        a = self.alpha
        for name in ("P", "Q", "Phat", "Qhat"):
            cur = getattr(self.gram, name)
            setattr(self.gram, name, (1.0 - a) * cur + a * getattr(batch, name))
        return self.gram


def sogram_gradient(theta, data, o1, o2, state):
    """Update ``state`` with the ``o2`` Gramians, then estimate over ``o1``."""
    ctx = _PairBatchContext(theta, data, [o1, o2])
    b1, b2 = ctx.batches
    smoothed = state.update(ctx.gramians(b2))
    return ctx.fw.pull_back(*ctx.cotangents(b1, smoothed))
