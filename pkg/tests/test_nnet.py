import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from setlab import (
    ConfigError,
    DeepSetsModel,
    DivergenceError,
    Mlp,
    ShapeError,
    TrainConfig,
    canonical_grid,
    deepsets_eval,
    grid_error,
    load_checkpoint,
    save_checkpoint,
    train,
)
from setlab.approx.collision import gamma_batch


def _linear_mlp(w, b):
    return Mlp([np.asarray(w, dtype=float)], [np.asarray(b, dtype=float)], ["identity"])


def test_mlp_zero_weights_yield_bias():
    net = _linear_mlp(np.zeros((3, 2)), [0.1, -0.2, 0.7])
    np.testing.assert_array_equal(net.forward(np.array([5.0, -3.0])), [0.1, -0.2, 0.7])


def test_mlp_single_linear_layer():
    w = np.array([[1.0, 2.0], [0.5, -1.0]])
    b = np.array([0.25, -0.5])
    v = np.array([0.3, -0.7])
    np.testing.assert_array_equal(_linear_mlp(w, b).forward(v), w @ v + b)


def test_mlp_tanh_odd_at_zero():
    net = Mlp([np.eye(2)], [np.zeros(2)], ["tanh"])
    np.testing.assert_array_equal(net.forward(np.zeros(2)), np.zeros(2))


def test_mlp_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        _linear_mlp(np.eye(2), np.zeros(2)).forward(np.zeros(3))
    with pytest.raises(ConfigError):
        Mlp([np.eye(2)], [np.zeros(3)], ["identity"])
    with pytest.raises(ConfigError):
        Mlp([np.eye(2)], [np.zeros(2)], ["softplus"])


def _flat_params(net):
    return np.concatenate([a.reshape(-1) for a in net.weights + net.biases])


def _set_flat_params(net, flat):
    pos = 0
    for arr in net.weights + net.biases:
        arr[...] = flat[pos : pos + arr.size].reshape(arr.shape)
        pos += arr.size


def _batch_loss(net, X, y):
    out, _ = net.forward_trace(X)
    return float(np.mean((out[:, 0] - y) ** 2))


def _analytic_grad(net, X, y):
    out, trace = net.forward_trace(X)
    grad_out = np.zeros_like(out)
    grad_out[:, 0] = 2.0 * (out[:, 0] - y) / X.shape[0]
    wg, bg, _ = net.backward(trace, grad_out)
    return np.concatenate([a.reshape(-1) for a in wg + bg])


def test_linear_model_gradient_closed_form():
    net = Mlp([np.array([[0.4, -0.3]])], [np.array([0.2])], ["identity"])
    x = np.array([[0.5, -1.0]])
    y = np.array([0.9])
    pred = float(net.forward(x[0])[0])
    grad = _analytic_grad(net, x, y)
    expected_w = 2.0 * (pred - y[0]) * x[0]
    np.testing.assert_allclose(grad[:2], expected_w, rtol=1e-15)
    assert math.isclose(grad[2], 2.0 * (pred - y[0]), rel_tol=1e-15)


def test_constant_loss_zero_gradient():
    net = Mlp([np.zeros((1, 2))], [np.array([0.3])], ["identity"])
    X = np.random.default_rng(0).uniform(-1, 1, (8, 2))
    grad = _analytic_grad(net, X, np.full(8, 0.3))
    np.testing.assert_array_equal(grad, np.zeros_like(grad))


@pytest.mark.parametrize("seed", range(10))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    net = Mlp.init([2, 5, 3, 1], ["tanh", "tanh", "identity"], seed=seed)
    X = rng.uniform(-1.0, 1.0, size=(4, 2))
    y = rng.uniform(-1.0, 1.0, size=4)
    analytic = _analytic_grad(net, X, y)
    flat = _flat_params(net)
    h = 1e-5
    fd = np.empty_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        _set_flat_params(net, bumped)
        up = _batch_loss(net, X, y)
        bumped[i] = flat[i] - h
        _set_flat_params(net, bumped)
        down = _batch_loss(net, X, y)
        fd[i] = (up - down) / (2.0 * h)
    _set_flat_params(net, flat)
    rel = np.linalg.norm(fd - analytic) / max(np.linalg.norm(analytic), 1e-12)
    assert rel <= 1e-4


def _random_model(n, seed):
    phi = Mlp.init([1, 8, n], ["tanh", "identity"], seed=seed)
    rho = Mlp.init([n, 8, 1], ["tanh", "identity"], seed=seed + 1)
    return DeepSetsModel(phi, n, rho)


def test_deepsets_identity_sums():
    phi = _linear_mlp([[1.0]], [0.0])
    rho = _linear_mlp([[1.0]], [0.0])
    model = DeepSetsModel(phi, 1, rho)
    x = np.array([0.25, -0.5, 0.125, 0.75])  # dyadic, so the sum is exact
    assert deepsets_eval(model, x) == math.fsum(x)


def test_deepsets_zero_readout():
    phi = Mlp.init([1, 4, 2], ["tanh", "identity"], seed=0)
    rho = _linear_mlp(np.zeros((1, 2)), [0.0])
    model = DeepSetsModel(phi, 2, rho)
    for x in ([0.1], [0.4, -0.9, 0.3]):
        assert deepsets_eval(model, np.array(x)) == 0.0


@settings(max_examples=40)
@given(st.data())
def test_deepsets_permutation_invariance_bitexact(data):
    m = data.draw(st.integers(min_value=2, max_value=6))
    x = np.array(data.draw(st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False),
        min_size=m, max_size=m,
    )))
    perm = data.draw(st.permutations(range(m)))
    model = _random_model(3, seed=11)
    assert deepsets_eval(model, x[list(perm)]) == deepsets_eval(model, x)


def test_model_dim_validation():
    phi = Mlp.init([1, 4, 2], ["tanh", "identity"], seed=0)
    rho = Mlp.init([3, 4, 1], ["tanh", "identity"], seed=1)
    with pytest.raises(ConfigError):
        DeepSetsModel(phi, 2, rho)


def test_encoder_export_matches_direct_gamma():
    model = _random_model(3, seed=5)
    spec = model.encoder_spec
    Z = np.array([[0.5, 0.0, -0.25], [1.0, 1.0, -1.0]])
    base = model.phi_net.forward(np.array([[-1.0], [1.0]]))
    signs = (-1.0) ** np.arange(1, 4)
    direct = np.stack([
        (signs[:, None] * (model.phi_net.forward(z[:, None]) - base[0])).sum(axis=0)
        + 0.5 * (base[1] - base[0])
        for z in Z
    ])
    np.testing.assert_allclose(gamma_batch(Z, spec), direct, atol=1e-12)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(task="sum", M=3, N=2, seed=0)
    with pytest.raises(ConfigError):
        TrainConfig(task="f_star", M=0, N=2, seed=0)
    with pytest.raises(ConfigError):
        TrainConfig(task="f_star", M=3, N=2, seed=0, step=-0.1)
    with pytest.raises(ConfigError):
        TrainConfig(task="f_star", M=3, N=2, seed=0, decay="exponential")
    cfg = TrainConfig(task="f_star", M=3, N=2, seed=7)
    assert TrainConfig.from_config(cfg.to_config()).content_hash() == cfg.content_hash()


def _small_config(**overrides):
    base = dict(
        task="f_star", M=3, N=3, seed=3, epochs=40, batch=64,
        step=0.05, n_samples=256, phi_hidden=(8,), rho_hidden=(8,),
        grid_resolution=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_train_is_reproducible():
    m1, r1 = train(_small_config())
    m2, r2 = train(_small_config())
    for a, b in zip(m1.phi_net.weights + m1.rho_net.weights,
                    m2.phi_net.weights + m2.rho_net.weights):
        np.testing.assert_array_equal(a, b)
    assert r1["loss_curve"] == r2["loss_curve"]
    assert r1["config_hash"] == r2["config_hash"]


def test_train_reduces_loss_and_reports_grid_error():
    model, metrics = train(_small_config(epochs=120))
    assert metrics["final_loss"] < metrics["loss_curve"][0]
    assert metrics["grid_max_error"] == grid_error(model, "f_star", 3, 7)
    assert np.isfinite(metrics["grid_max_error"])


def test_train_max_task_runs():
    model, metrics = train(_small_config(task="max", N=2, epochs=60))
    assert metrics["final_loss"] < metrics["loss_curve"][0]


def test_train_divergence():
    with pytest.raises(DivergenceError):
        train(_small_config(step=1e8, epochs=50))


def test_canonical_grid_shape_and_order():
    grid = canonical_grid(3, 5)
    assert grid.shape == (math.comb(5 + 2, 3), 3)
    assert np.all(np.diff(grid, axis=1) <= 0)
    np.testing.assert_array_equal(grid[0], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(grid[-1], [-1.0, -1.0, -1.0])


def test_grid_error_of_zero_model():
    phi = _linear_mlp([[0.0]], [0.0])
    rho = _linear_mlp([[0.0]], [0.0])
    model = DeepSetsModel(phi, 1, rho)
    # |f*| reaches 1 on the grid, and the zero model outputs 0 everywhere
    assert grid_error(model, "f_star", 2, 9) == 1.0


def test_checkpoint_round_trip(tmp_path):
    model, metrics = train(_small_config(epochs=10))
    cfg = _small_config(epochs=10)
    path = tmp_path / "model.json"
    save_checkpoint(model, cfg, path, metrics=metrics)
    loaded, payload = load_checkpoint(path)
    x = np.array([0.3, -0.8, 0.5])
    assert deepsets_eval(loaded, x) == deepsets_eval(model, x)
    assert payload["config_hash"] == cfg.content_hash()
    assert payload["seed"] == cfg.seed
    assert payload["config"]["task"] == "f_star"
