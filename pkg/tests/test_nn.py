import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from nearwell import nn
from nearwell.nn.train import fit_scaled
from nearwell.upscale import FeatureSpec


def single_layer(w, b, activation="linear"):
    w = np.atleast_2d(np.asarray(w, dtype=float))
    return nn.FCNN((w.shape[1], 1), activation, [w, np.atleast_1d(np.asarray(b, dtype=float))])


def test_forward_examples():
    x = np.array([[0.3], [-0.7], [1.0]])
    assert_array_equal(nn.forward(single_layer([[1.0]], [0.0]), x), x[:, 0])
    net = nn.FCNN((3, 4, 1), "tanh", [np.zeros((4, 3)), np.zeros(4), np.zeros((1, 4)), np.array([2.5])])
    assert_array_equal(nn.forward(net, np.random.default_rng(0).normal(size=(5, 3))), 2.5)
    # one sigmoid unit with zero input weights sits at 1/2
    net = nn.FCNN((2, 1, 1), "sigmoid", [np.zeros((1, 2)), np.zeros(1), np.array([[3.0]]), np.array([0.25])])
    assert nn.forward(net, np.array([[0.4, -0.9]]))[0] == 0.5 * 3.0 + 0.25


def test_loss_examples():
    net = single_layer([[1.0]], [0.0])
    x = np.array([[1.0], [2.0]])
    assert nn.loss_mse(net, x, x[:, 0]) == 0.0
    assert nn.loss_mse(net, x, x[:, 0] - 0.3) == pytest.approx(0.09, rel=1e-14)
    assert nn.loss_mse(net, x, x[:, 0] - np.array([1.0, 3.0])) == 5.0


def fd_gradient(net, x, y, h=1e-5):
    out = []
    for i, p in enumerate(net.params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            plus, minus = net.copy(), net.copy()
            plus.params[i][idx] += h
            minus.params[i][idx] -= h
            g[idx] = (nn.loss_mse(plus, x, y) - nn.loss_mse(minus, x, y)) / (2 * h)
        out.append(g)
    return out


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    acts = ["sigmoid", "tanh", "softplus", "linear"]
    depth = int(rng.integers(1, 4))
    sizes = [int(rng.integers(1, 5))] + [int(rng.integers(2, 6)) for _ in range(depth)] + [1]
    net = nn.init_network(sizes, acts[seed % 4], seed=seed)
    net.params = [p + 0.1 * rng.normal(size=p.shape) for p in net.params]
    x = rng.uniform(-1, 1, size=(7, sizes[0]))
    y = rng.uniform(-1, 1, size=7)
    _, grads = nn.gradients(net, x, y)
    for g, g_fd in zip(grads, fd_gradient(net, x, y)):
        assert_allclose(g, g_fd, rtol=1e-6, atol=1e-9)


def test_gradient_special_cases():
    net = nn.init_network((3, 5, 1), "sigmoid", seed=1)
    x = np.random.default_rng(2).uniform(-1, 1, size=(4, 3))
    loss, grads = nn.gradients(net, x, nn.forward(net, x))
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)
    y = np.linspace(-1, 1, 4)
    _, g1 = nn.gradients(net, x, y)
    _, g2 = nn.gradients(net, np.vstack([x, x]), np.concatenate([y, y]))
    for a, b in zip(g1, g2):
        assert_allclose(a, b, rtol=1e-13, atol=1e-16)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["sigmoid", "tanh", "softplus"]))
def test_input_derivative_matches_finite_differences(seed, act):
    rng = np.random.default_rng(seed)
    net = nn.init_network((4, 6, 6, 1), act, seed=seed)
    x = rng.uniform(-1, 1, size=(3, 4))
    d = rng.normal(size=4)
    _, dx = nn.input_gradient(net, x)
    h = 1e-5
    fd = (nn.forward(net, x + h * d) - nn.forward(net, x - h * d)) / (2 * h)
    assert_allclose(dx @ d, fd, rtol=1e-6, atol=1e-9)


def test_adam_steps():
    cfg = nn.TrainConfig(lr=1e-3)
    p = [np.array([1.0, -2.0, 0.5])]
    g = [np.array([3.0, -1e-3, 0.0])]
    state = nn.AdamState.zeros_like(p)
    out = nn.adam_step(p, g, state, cfg)
    # first bias-corrected step has magnitude lr in every moving component
    assert_allclose(out[0] - p[0], -1e-3 * np.sign(g[0]), rtol=1e-4, atol=0)
    assert state.t == 1
    state = nn.AdamState([np.ones(3)], [np.ones(3)], t=5)
    out = nn.adam_step(p, [np.zeros(3)], state, cfg)
    assert_allclose(state.m[0], 0.9)
    assert_allclose(state.v[0], 0.999)
    assert np.all(out[0] != p[0])  # stale momentum still moves the parameters
    state = nn.AdamState.zeros_like(p)
    assert_array_equal(nn.adam_step(p, [np.zeros(3)], state, cfg)[0], p[0])


def test_train_config_validation():
    with pytest.raises(ValueError):
        nn.TrainConfig(beta1=1.0)
    with pytest.raises(ValueError):
        nn.TrainConfig(batch_size=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_scaler_round_trip(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(20, 3)) * np.array([1e7, 1e-12, 10.0]) + np.array([1e7, 2e-12, 0.0])
    y = rng.normal(size=20)
    sc = nn.Scaler.fit(x, y)
    xs = sc.scale_x(x)
    assert_allclose(xs.min(axis=0), -1.0, atol=1e-12)
    assert_allclose(xs.max(axis=0), 1.0, atol=1e-12)
    assert_allclose(sc.scale_x(0.5 * (sc.x_min + sc.x_max)), 0.0, atol=1e-12)
    assert_allclose(sc.unscale_x(xs), x, rtol=1e-12, atol=0)
    assert_allclose(sc.unscale_y(sc.scale_y(y)), y, rtol=1e-12, atol=1e-12)


def test_scaler_constant_column_and_clamping():
    sc = nn.Scaler.fit(np.array([[1.0, 5.0], [3.0, 5.0]]), np.array([0.0, 1.0]))
    assert sc.x_max[1] > sc.x_min[1]
    clipped, mask = sc.clamp_x(np.array([[0.0, 5.0], [2.0, 5.0]]))
    assert_array_equal(clipped[0], [1.0, 5.0])
    assert_array_equal(mask, [[True, False], [False, False]])
    with pytest.raises(ValueError):
        nn.Scaler([0.0], [0.0], 0.0, 1.0)


def test_realizable_linear_fit():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, size=(200, 2))
    y = x @ np.array([0.7, -1.3]) + 0.2
    xv = rng.uniform(-1, 1, size=(50, 2))
    yv = xv @ np.array([0.7, -1.3]) + 0.2
    res = nn.train(x, y, xv, yv, nn.Architecture(0, 1, "linear", 1e-2),
                   nn.TrainConfig(batch_size=32, max_epochs=3000, patience=200))
    assert res.best_val < 1e-10
    pred = res.scaler.unscale_y(nn.forward(res.net, res.scaler.scale_x(xv)))
    assert_allclose(pred, yv, atol=1e-4)


def test_early_stop_on_flat_loss():
    net = single_layer(np.zeros((1, 2)), [0.0])
    x = np.random.default_rng(0).uniform(-1, 1, size=(10, 2))
    params, hist, best = fit_scaled(net, x, np.zeros(10), x, np.zeros(10),
                                    nn.TrainConfig(patience=50, max_epochs=1000))
    assert best == 0
    assert len(hist["val"]) - 1 - best <= 51


def test_training_is_deterministic_and_keeps_best_epoch():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, size=(80, 2))
    y = np.sin(3 * x[:, 0]) + x[:, 1] ** 2
    arch = nn.Architecture(2, 8, "tanh", 1e-2)
    cfg = nn.TrainConfig(batch_size=16, max_epochs=60, patience=10, seed=4)
    a = nn.train(x[:60], y[:60], x[60:], y[60:], arch, cfg)
    b = nn.train(x[:60], y[:60], x[60:], y[60:], arch, cfg)
    assert_array_equal(a.history["val"], b.history["val"])
    for p, q in zip(a.net.params, b.net.params):
        assert_array_equal(p, q)
    assert a.best_val == a.history["val"].min()
    assert nn.loss_mse(a.net, a.scaler.scale_x(x[60:]), a.scaler.scale_y(y[60:])) == pytest.approx(a.best_val)
    # scaler sees the training split only
    assert_array_equal(a.scaler.x_min, x[:60].min(axis=0))


def test_nan_loss_is_reported_with_epoch():
    x = np.array([[0.0], [1.0]])
    with pytest.raises(nn.TrainingError, match="epoch 0"):
        nn.train(x, np.array([0.0, 1.0]), x, np.array([np.nan, 1.0]), nn.Architecture(1, 2, "tanh"),
                 nn.TrainConfig(max_epochs=5))


def test_search_table_and_selection():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1, 1, size=(120, 2))
    y = x[:, 0] * x[:, 1]
    grid = {"depth": (0, 2), "width": (6,), "activation": ("tanh",), "lr": (1e-2,)}
    cfg = nn.TrainConfig(batch_size=32, max_epochs=150, patience=30)
    res = nn.hyperparameter_search(x[:90], y[:90], x[90:], y[90:], grid, cfg)
    assert len(res.rows) == 2
    table = res.table()
    assert table[0][-1] == "val_loss" and len(table) == 3
    best_row = min(res.rows, key=lambda r: r["val_loss"])
    assert res.best.depth == best_row["depth"] == 2  # the product is not linear
    one = nn.hyperparameter_search(x[:90], y[:90], x[90:], y[90:], {**grid, "depth": (2,)}, cfg)
    assert one.best == res.best
    with pytest.raises(ValueError):
        nn.hyperparameter_search(x, y, x, y, {"momentum": (0.9,)}, cfg)


def test_sensitivity_extremes():
    net = nn.FCNN((2, 3, 1), "sigmoid", [np.array([[1.0, 0.0], [-2.0, 0.0], [0.5, 0.0]]), np.zeros(3),
                                          np.ones((1, 3)), np.zeros(1)])
    curves = nn.sensitivity(net, 1, n_draws=5)
    assert curves.shape == (5, 101)
    assert_array_equal(curves, np.repeat(curves[:, :1], 101, axis=1))
    ranges = nn.mean_ranges(net, n_draws=5)
    assert ranges[1] == 0.0 and ranges[0] > 0
    assert nn.mean_ranges(single_layer([[1.0]], [0.0]))[0] == pytest.approx(2.0, abs=1e-15)
    with pytest.raises(IndexError):
        nn.sensitivity(net, 2)


def test_model_file_round_trip(tmp_path):
    net = nn.init_network((3, 7, 5, 1), "softplus", seed=11)
    net.params = [p + np.random.default_rng(1).normal(size=p.shape) / 3 for p in net.params]
    sc = nn.Scaler(np.array([5e6, -12.5, 1.0]), np.array([1.2e7, -10.0, 1e5]), -13.0, -9.5)
    model = nn.WellIndexNet(net, sc, FeatureSpec.for_family("co2_2d"))
    path = tmp_path / "m.txt"
    nn.save_model(path, model)
    back = nn.load_model(path)
    x = np.random.default_rng(2).uniform(-1, 1, size=(9, 3))
    assert_array_equal(nn.forward(back.net, x), nn.forward(net, x))
    assert back.spec == model.spec
    assert_array_equal(back.scaler.x_min, sc.x_min)
    assert path.read_text().startswith("nearwell-fcnn 1\n")


def test_model_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        nn.load_model(tmp_path / "missing.txt")
    net = nn.init_network((3, 4, 1), "sigmoid")
    sc = nn.Scaler(np.zeros(3), np.ones(3), 0.0, 1.0)
    path = tmp_path / "m.txt"
    nn.save_model(path, nn.WellIndexNet(net, sc, FeatureSpec.for_family("co2_2d")))
    lines = path.read_text().splitlines()
    w1 = lines.index("W 1 1 4")
    bad = lines[:w1 + 1] + [" ".join(lines[w1 + 1].split()[:3])] + lines[w1 + 2:]
    path.write_text("\n".join(bad) + "\n")
    with pytest.raises(nn.ModelFormatError, match="layer 1"):
        nn.load_model(path)
    path.write_text("nearwell-fcnn 9\n")
    with pytest.raises(nn.ModelFormatError, match="version"):
        nn.load_model(path)
    with pytest.raises(nn.ModelFormatError):
        nn.WellIndexNet(net, sc, FeatureSpec.for_family("h2o"))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_log_target_gives_positive_well_index(seed):
    rng = np.random.default_rng(seed)
    net = nn.init_network((3, 5, 1), "sigmoid", seed=seed)
    net.params = [p * 20 for p in net.params]
    spec = FeatureSpec.for_family("co2_2d")
    sc = nn.Scaler(-np.ones(3), np.ones(3), -14.0, -9.0)
    y = sc.unscale_y(nn.forward(net, rng.uniform(-1, 1, size=(50, 3))))
    assert np.all(spec.inverse(y) > 0)
