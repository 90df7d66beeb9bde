"""Feed-forward embedding towers with hand-written VJP and JVP.

A tower maps entity features to k-dimensional embeddings through dense
layers with ELU on every hidden layer and identity on the output layer.
With ``input_mode="onehot"`` the features are entity indices and the first
layer is a row lookup into its weight matrix.

Parameter layout (the flat vector of one tower): layers in order from input
to output; for each layer the weight matrix of shape ``(fan_in, fan_out)``
flattened row-major, followed by the bias of length ``fan_out``. A layer
computes ``z = x @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DataError, DimensionError

CHECKPOINT_VERSION = 1


def elu(z):
    return np.where(z >= 0, z, np.expm1(np.minimum(z, 0.0)))


def elu_grad(z):
    # derivative at exactly 0 taken as 1
    return np.where(z >= 0, 1.0, np.exp(np.minimum(z, 0.0)))


@dataclass(frozen=True)
class TowerSpec:
    input_dim: int
    hidden_dims: tuple = (256, 256)
    output_dim: int = 128
    input_mode: str = "onehot"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_mode not in ("onehot", "dense"):
            raise ValueError(f"unknown input_mode {self.input_mode!r}")
        if self.output_dim <= 0 or self.input_dim <= 0:
            raise ValueError("input_dim and output_dim must be positive")
        if any(h <= 0 for h in self.hidden_dims):
            raise ValueError("hidden layer widths must be positive")

    @property
    def layer_dims(self):
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def num_params(self):
        return sum(fi * fo + fo for fi, fo in self.layer_dims)

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "output_dim": self.output_dim,
            "input_mode": self.input_mode,
        }


@dataclass
class TowerParams:
    """Per-layer views into a flat parameter vector."""

    spec: TowerSpec
    flat: np.ndarray
    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)

    @classmethod
    def unflatten(cls, spec, flat):
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (spec.num_params,):
            raise DimensionError(
                f"expected {spec.num_params} parameters, got shape {flat.shape}"
            )
        weights, biases = [], []
        pos = 0
        for fi, fo in spec.layer_dims:
            weights.append(flat[pos : pos + fi * fo].reshape(fi, fo))
            pos += fi * fo
            biases.append(flat[pos : pos + fo])
            pos += fo
        return cls(spec, flat, weights, biases)

    def flatten(self):
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.weights, self.biases)])


@dataclass
class ForwardTape:
    """Activations recorded by ``forward_batch``.

    ``pre[l]`` is the pre-activation of layer ``l``; ``inputs`` holds the
    entity indices (onehot mode) or the dense feature rows.
    """

    spec: TowerSpec
    inputs: np.ndarray
    pre: list
    post: list

    @property
    def batch_size(self):
        return self.pre[0].shape[0]

    def layer_input(self, l):
        return self.post[l - 1] if l > 0 else self.inputs


def init_params(spec, seed):
    """Glorot-uniform weights, zero biases, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    parts = []
    for fi, fo in spec.layer_dims:
        limit = np.sqrt(6.0 / (fi + fo))
        parts.append(rng.uniform(-limit, limit, size=fi * fo))
        parts.append(np.zeros(fo))
    return TowerParams.unflatten(spec, np.concatenate(parts))


def _check_features(spec, features):
    if spec.input_mode == "onehot":
        idx = np.asarray(features)
        if idx.ndim != 1 or not np.issubdtype(idx.dtype, np.integer):
            raise DimensionError("onehot towers take a 1-D integer index array")
        if idx.size and (idx.min() < 0 or idx.max() >= spec.input_dim):
            raise DimensionError(f"entity index out of range [0, {spec.input_dim})")
        return idx
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise DimensionError(
            f"expected features of shape (batch, {spec.input_dim}), got {x.shape}"
        )
    return x


def forward_batch(params, features):
    """Embed a batch of entities; returns ``(embeddings, tape)``."""
    spec = params.spec
    x = _check_features(spec, features)
    pre, post = [], []
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        if l == 0 and spec.input_mode == "onehot":
            z = w[x] + b
        else:
            inp = x if l == 0 else post[-1]
            z = inp @ w + b
        pre.append(z)
        if l < last:
            post.append(elu(z))
    return pre[-1], ForwardTape(spec, x, pre, post)


def _check_tape(params, tape, rows):
    if tape.spec != params.spec or len(tape.pre) != len(params.weights):
        raise ContractError("tape was recorded for a different tower")
    if rows != tape.batch_size:
        raise ContractError(
            f"batch has {rows} rows but tape was recorded on {tape.batch_size}"
        )


def _onehot_transpose_product(idx, input_dim, m):
    """onehot(idx).T @ m without materialising the one-hot matrix."""
    s = sp.csr_matrix(
        (np.ones(idx.size), idx, np.arange(idx.size + 1)), shape=(idx.size, input_dim)
    )
    return np.asarray(s.T @ m)


def batch_vjp(params, tape, cotangents):
    """sum_i (df_i/dtheta)^T M[i, :] over the batch, as a flat vector."""
    spec = params.spec
    m = np.asarray(cotangents, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != spec.output_dim:
        raise DimensionError(f"cotangents must have {spec.output_dim} columns")
    _check_tape(params, tape, m.shape[0])
    nlayers = len(params.weights)
    grads_w = [None] * nlayers
    grads_b = [None] * nlayers
    delta = m
    for l in range(nlayers - 1, -1, -1):
        if l == 0 and spec.input_mode == "onehot":
            grads_w[l] = _onehot_transpose_product(tape.inputs, spec.input_dim, delta)
        else:
            grads_w[l] = tape.layer_input(l).T @ delta
        grads_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ params.weights[l].T) * elu_grad(tape.pre[l - 1])
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in zip(grads_w, grads_b)])


def batch_jvp(params, tape, direction):
    """Rows ``(df_i/dtheta) d`` for every entity in the batch (forward mode)."""
    spec = params.spec
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != (spec.num_params,):
        raise DimensionError(
            f"direction must have length {spec.num_params}, got {d.shape}"
        )
    _check_tape(params, tape, tape.batch_size)
    dp = TowerParams.unflatten(spec, d)
    dz = None
    for l, (w, dw, db) in enumerate(zip(params.weights, dp.weights, dp.biases)):
        if l == 0:
            if spec.input_mode == "onehot":
                dz = dw[tape.inputs] + db
            else:
                dz = tape.inputs @ dw + db
        else:
            da = elu_grad(tape.pre[l - 1]) * dz
            dz = da @ w + tape.post[l - 1] @ dw + db
    return dz


class TwoTower:
    """The pair (left tower f, right tower g) over a joint vector [theta_u; theta_v]."""

    def __init__(self, left, right):
        if left.output_dim != right.output_dim:
            raise DimensionError("both towers must emit the same embedding size k")
        self.left = left
        self.right = right

    @property
    def k(self):
        return self.left.output_dim

    @property
    def d_left(self):
        return self.left.num_params

    @property
    def d_right(self):
        return self.right.num_params

    @property
    def num_params(self):
        return self.d_left + self.d_right

    def split(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.num_params,):
            raise DimensionError(
                f"theta must have length {self.num_params}, got {theta.shape}"
            )
        return (
            TowerParams.unflatten(self.left, theta[: self.d_left]),
            TowerParams.unflatten(self.right, theta[self.d_left :]),
        )

    def init(self, seed):
        ss = np.random.SeedSequence(seed)
        s_left, s_right = ss.spawn(2)
        return np.concatenate(
            [init_params(self.left, s_left).flat, init_params(self.right, s_right).flat]
        )

    def __eq__(self, other):
        return isinstance(other, TwoTower) and (self.left, self.right) == (other.left, other.right)

    def __repr__(self):
        return f"TwoTower(left={self.left}, right={self.right})"


def save_checkpoint(path, model, theta, extra=None):
    """Write specs and the flat theta to an ``.npz`` container."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.num_params,):
        raise DimensionError("theta does not match the model")
    header = {
        "format": "extremesim-checkpoint",
        "version": CHECKPOINT_VERSION,
        "layout": "layer-major, weights (row-major, fan_in x fan_out) then bias; left tower first",
        "left": model.left.to_dict(),
        "right": model.right.to_dict(),
        "extra": extra or {},
    }
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header)), theta=theta)


def load_checkpoint(path):
    """Returns ``(model, theta, extra)``."""
    try:
        with np.load(path, allow_pickle=False) as z:
            header = json.loads(str(z["header"]))
            theta = np.array(z["theta"], dtype=np.float64)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if header.get("format") != "extremesim-checkpoint":
        raise DataError(f"{path} is not a checkpoint file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('version')}")
    model = TwoTower(TowerSpec(**header["left"]), TowerSpec(**header["right"]))
    if theta.shape != (model.num_params,):
        raise DataError("checkpoint theta length does not match its tower specs")
    return model, theta, header.get("extra", {})
