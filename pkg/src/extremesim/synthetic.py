"""Generated problem instances: hand-checkable toys, random tiny instances
for oracle comparisons, and a planted-structure interaction set with the
size profile of MovieLens-1M."""

from __future__ import annotations

import math

import numpy as np

from .data import build_imputation
from .linalg import SparseMatrixDual
from .losses import LossKind
from .net import TowerSpec, TwoTower
from .objective import ProblemData

# train statistics of the ml1m split used in the experiments
ML1M_SHAPE = (6037, 3513)
ML1M_TRAIN_NNZ = 517_770


def toy_t1(omega=1.0, lam=0.0, loss="logistic"):
    """m = n = 2, k = 1, single linear layer per tower.

    At the returned theta, P = [1; 2], Q = [1; 1], imputations are zero
    and the only observed pair is (0, 0) with R = 1.
    """
    model = TwoTower(
        TowerSpec(input_dim=2, hidden_dims=(), output_dim=1),
        TowerSpec(input_dim=2, hidden_dims=(), output_dim=1),
    )
    observed = SparseMatrixDual([0], [0], [1.0], (2, 2))
    data = ProblemData(
        observed=observed,
        model=model,
        left_features=np.arange(2),
        right_features=np.arange(2),
        a=np.ones(2),
        b=np.ones(2),
        p_tilde=np.zeros((2, 1)),
        q_tilde=np.zeros((2, 1)),
        omega=omega,
        lam=lam,
        loss=loss,
    )
    # weights (2x1) then bias (1) for each tower
    theta = np.array([1.0, 2.0, 0.0, 1.0, 1.0, 0.0])
    return data, theta


def random_instance(
    seed,
    m=None,
    n=None,
    k=None,
    hidden=None,
    nnz=None,
    omega=None,
    lam=None,
    loss=None,
    input_mode=None,
    uniform_weights=False,
):
    """A random tiny problem and a random theta.

    Unspecified sizes are drawn at random within the oracle's comfort zone
    (m, n <= 16, k <= 8, two hidden layers, |O| <= 32).
    """
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(2, 17))
    n = n or int(rng.integers(2, 17))
    k = k or int(rng.integers(1, 9))
    if hidden is None:
        hidden = tuple(int(h) for h in rng.integers(2, 6, size=2))
    if nnz is None:
        nnz = int(rng.integers(0, min(32, m * n) + 1))
    if omega is None:
        omega = float(rng.choice([0.0, 0.25, 1.0]))
    if lam is None:
        lam = float(rng.uniform(0.1, 1.0))
    if loss is None:
        loss = str(rng.choice(["logistic", "squared"]))
    if input_mode is None:
        input_mode = str(rng.choice(["onehot", "dense"]))

    if input_mode == "onehot":
        left_in, right_in = m, n
        left_x, right_x = np.arange(m), np.arange(n)
    else:
        left_in, right_in = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        left_x, right_x = rng.normal(size=(m, left_in)), rng.normal(size=(n, right_in))
    model = TwoTower(
        TowerSpec(left_in, hidden, k, input_mode),
        TowerSpec(right_in, hidden, k, input_mode),
    )
    flat = rng.choice(m * n, size=nnz, replace=False)
    if LossKind(loss) is LossKind.LOGISTIC:
        vals = rng.choice([-1.0, 1.0], size=nnz)
    else:
        vals = rng.normal(size=nnz)
    observed = SparseMatrixDual(flat // n, flat % n, vals, (m, n))
    if uniform_weights:
        a, b = np.ones(m), np.ones(n)
    else:
        a, b = rng.uniform(0.5, 2.0, size=m), rng.uniform(0.5, 2.0, size=n)
    data = ProblemData(
        observed=observed,
        model=model,
        left_features=left_x,
        right_features=right_x,
        a=a,
        b=b,
        p_tilde=0.5 * rng.normal(size=(m, k)),
        q_tilde=0.5 * rng.normal(size=(n, k)),
        omega=omega,
        lam=lam,
        loss=loss,
    )
    theta = model.init(int(rng.integers(2**31))) + 0.3 * rng.normal(size=model.num_params)
    return data, theta


def onehot_problem(observed, k=128, hidden=(256, 256), omega=2.0**-4, lam=2.0**2, loss="logistic"):
    """ID-only two-tower problem with the default weights and imputation."""
    m, n = observed.shape
    model = TwoTower(TowerSpec(m, hidden, k), TowerSpec(n, hidden, k))
    pt, qt = build_imputation("constant", k, m, n)
    return ProblemData(
        observed=observed,
        model=model,
        left_features=np.arange(m),
        right_features=np.arange(n),
        a=np.ones(m),
        b=np.ones(n),
        p_tilde=pt,
        q_tilde=qt,
        omega=omega,
        lam=lam,
        loss=loss,
    )


def planted_interactions(m, n, nnz, seed, rank=8, affinity=2.5, zipf=0.9, min_per_row=5):
    """Implicit-feedback pairs from a latent-factor model with item popularity.

    User i picks ``c_i`` distinct items with probability proportional to
    ``exp(affinity * u_i . v_j / sqrt(rank)) * popularity_j``, where
    popularity follows a Zipf law over a random item order and the activity
    counts ``c_i`` are log-normal. Exactly ``nnz`` pairs are returned, all
    with R = 1.
    """
    if nnz > m * n:
        raise ValueError("more pairs requested than exist")
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(m, rank))
    V = rng.normal(size=(n, rank))
    log_pop = -zipf * np.log1p(rng.permutation(n).astype(np.float64))

    raw = rng.lognormal(mean=0.0, sigma=0.9, size=m)
    cap = max(min_per_row, n // 2)
    counts = np.clip(raw / raw.sum() * nnz, min_per_row, cap)
    counts = np.floor(counts / counts.sum() * nnz).astype(np.int64)
    counts = np.clip(counts, 1, cap)
    # largest-remainder style top-up so the total is exact
    deficit = nnz - int(counts.sum())
    order = rng.permutation(m)
    pos = 0
    while deficit != 0:
        i = order[pos % m]
        if deficit > 0 and counts[i] < cap:
            counts[i] += 1
            deficit -= 1
        elif deficit < 0 and counts[i] > 1:
            counts[i] -= 1
            deficit += 1
        pos += 1

    rows, cols = [], []
    block = 512
    for s in range(0, m, block):
        e = min(s + block, m)
        logits = affinity * (U[s:e] @ V.T) / math.sqrt(rank) + log_pop
        keys = logits + rng.gumbel(size=logits.shape)
        ranked = np.argsort(-keys, axis=1, kind="stable")
        for r in range(e - s):
            c = int(counts[s + r])
            picked = np.sort(ranked[r, :c])
            rows.append(np.full(c, s + r, dtype=np.int64))
            cols.append(picked)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return SparseMatrixDual(rows, cols, np.ones(rows.size), (m, n))
