import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extremesim.errors import ContractError, DataError, DimensionError
from extremesim.net import (
    TowerParams,
    TowerSpec,
    TwoTower,
    batch_jvp,
    batch_vjp,
    elu,
    forward_batch,
    init_params,
    load_checkpoint,
    save_checkpoint,
)

from conftest import rel


def _linear(weight, input_mode="dense"):
    spec = TowerSpec(input_dim=1, hidden_dims=(), output_dim=1, input_mode=input_mode)
    return TowerParams.unflatten(spec, np.array([weight, 0.0]))


def test_default_spec():
    spec = TowerSpec(input_dim=10)
    assert spec.hidden_dims == (256, 256)
    assert spec.output_dim == 128


def test_param_count_and_determinism():
    spec = TowerSpec(input_dim=3, hidden_dims=(2,), output_dim=1, input_mode="dense")
    assert spec.num_params == 3 * 2 + 2 + 2 * 1 + 1 == 11
    a, b = init_params(spec, 7), init_params(spec, 7)
    np.testing.assert_array_equal(a.flat, b.flat)
    assert not any(bias.any() for bias in a.biases)


def test_glorot_bounds():
    spec = TowerSpec(input_dim=30, hidden_dims=(20,), output_dim=10, input_mode="dense")
    p = init_params(spec, 0)
    for w, (fi, fo) in zip(p.weights, spec.layer_dims):
        assert np.abs(w).max() <= np.sqrt(6.0 / (fi + fo))


def test_flatten_roundtrip(rng):
    spec = TowerSpec(input_dim=4, hidden_dims=(3, 2), output_dim=2, input_mode="dense")
    flat = rng.normal(size=spec.num_params)
    np.testing.assert_array_equal(TowerParams.unflatten(spec, flat).flatten(), flat)
    # layout: first layer weight row-major, then its bias
    p = TowerParams.unflatten(spec, flat)
    np.testing.assert_array_equal(p.weights[0], flat[:12].reshape(4, 3))
    np.testing.assert_array_equal(p.biases[0], flat[12:15])


def test_forward_examples():
    out, _ = forward_batch(_linear(2.0), np.array([[3.0]]))
    assert out[0, 0] == 6.0
    spec = TowerSpec(input_dim=3, hidden_dims=(4,), output_dim=2, input_mode="dense")
    zero = TowerParams.unflatten(spec, np.zeros(spec.num_params))
    out, _ = forward_batch(zero, np.ones((5, 3)))
    assert not out.any()
    with pytest.raises(DimensionError):
        forward_batch(zero, np.ones((5, 2)))


def test_elu_values():
    assert abs(elu(np.array(-40.0)) + 1.0) < 1e-12
    assert elu(np.array(0.0)) == 0.0
    assert elu(np.array(2.5)) == 2.5


def test_vjp_jvp_hand_examples():
    p = _linear(5.0)
    _, tape = forward_batch(p, np.array([[2.0]]))
    g = batch_vjp(p, tape, np.array([[3.0]]))
    assert g[0] == 6.0  # d(theta * u)/dtheta * c = u * c
    assert g[1] == 3.0
    p = _linear(2.0)
    _, tape = forward_batch(p, np.array([[3.0]]))
    assert batch_jvp(p, tape, np.array([1.0, 0.0]))[0, 0] == 3.0
    assert not batch_vjp(p, tape, np.zeros((1, 1))).any()
    assert not batch_jvp(p, tape, np.zeros(2)).any()


def test_stale_tape_rejected(rng):
    spec = TowerSpec(input_dim=3, hidden_dims=(4,), output_dim=2, input_mode="dense")
    p = init_params(spec, 0)
    _, tape = forward_batch(p, rng.normal(size=(5, 3)))
    with pytest.raises(ContractError):
        batch_vjp(p, tape, np.ones((4, 2)))
    other = init_params(TowerSpec(input_dim=3, hidden_dims=(5,), output_dim=2, input_mode="dense"), 0)
    with pytest.raises(ContractError):
        batch_jvp(other, tape, np.zeros(other.spec.num_params))
    with pytest.raises(DimensionError):
        batch_jvp(p, tape, np.zeros(3))


def _random_tower(rng, mode):
    spec = TowerSpec(input_dim=4, hidden_dims=(5, 3), output_dim=3, input_mode=mode)
    p = TowerParams.unflatten(spec, 0.7 * rng.normal(size=spec.num_params))
    x = rng.integers(0, 4, size=6) if mode == "onehot" else rng.normal(size=(6, 4))
    return p, x


@pytest.mark.parametrize("mode", ["dense", "onehot"])
def test_vjp_matches_finite_differences(rng, mode):
    p, x = _random_tower(rng, mode)
    M = rng.normal(size=(6, 3))
    _, tape = forward_batch(p, x)
    g = batch_vjp(p, tape, M)
    eps = 1e-6
    fd = np.empty_like(g)
    for t in range(g.size):
        e = np.zeros_like(g)
        e[t] = eps
        fp, _ = forward_batch(TowerParams.unflatten(p.spec, p.flat + e), x)
        fm, _ = forward_batch(TowerParams.unflatten(p.spec, p.flat - e), x)
        fd[t] = np.sum((fp - fm) * M) / (2 * eps)
    assert rel(g, fd) <= 1e-6


@pytest.mark.parametrize("mode", ["dense", "onehot"])
def test_jvp_matches_finite_differences(rng, mode):
    p, x = _random_tower(rng, mode)
    d = rng.normal(size=p.spec.num_params)
    _, tape = forward_batch(p, x)
    eps = 1e-6
    fp, _ = forward_batch(TowerParams.unflatten(p.spec, p.flat + eps * d), x)
    fm, _ = forward_batch(TowerParams.unflatten(p.spec, p.flat - eps * d), x)
    assert rel(batch_jvp(p, tape, d), (fp - fm) / (2 * eps)) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["dense", "onehot"]))
def test_vjp_jvp_duality(seed, mode):
    rng = np.random.default_rng(seed)
    p, x = _random_tower(rng, mode)
    _, tape = forward_batch(p, x)
    v = rng.normal(size=(6, 3))
    d = rng.normal(size=p.spec.num_params)
    lhs = np.sum(v * batch_jvp(p, tape, d))
    rhs = batch_vjp(p, tape, v) @ d
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_two_tower_split_and_init():
    model = TwoTower(TowerSpec(5, (3,), 2), TowerSpec(4, (3,), 2))
    theta = model.init(3)
    np.testing.assert_array_equal(theta, model.init(3))
    left, right = model.split(theta)
    assert left.flat.size == model.d_left and right.flat.size == model.d_right
    with pytest.raises(DimensionError):
        model.split(theta[:-1])
    with pytest.raises(DimensionError):
        TwoTower(TowerSpec(5, (), 2), TowerSpec(4, (), 3))


def test_checkpoint_roundtrip(tmp_path, rng):
    model = TwoTower(TowerSpec(5, (3,), 2), TowerSpec(4, (), 2, "dense"))
    theta = rng.normal(size=model.num_params)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, model, theta, {"note": "x"})
    m2, t2, extra = load_checkpoint(path)
    assert m2 == model
    np.testing.assert_array_equal(t2, theta)
    assert extra == {"note": "x"}
    (tmp_path / "bad.npz").write_bytes(b"nope")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "bad.npz")
