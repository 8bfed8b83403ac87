import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from v2x_aoi.checks import mlp_gradient_error, numeric_gradient
from v2x_aoi.neural import (MLP, Adam, MlpSpec, actor_spec, adam_step, critic_spec, gradients,
                            load_checkpoint, save_checkpoint, soft_update)


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec((3,))
    with pytest.raises(ValueError):
        MlpSpec((3, 0, 2))
    with pytest.raises(ValueError):
        MlpSpec((3, 2), output_activation="sigmoid")


def test_table_sizes():
    assert actor_spec(210, 8).layer_sizes == (210, 500, 300, 8)
    assert critic_spec(1062, 20).layer_sizes == (1082, 500, 300, 1)


def test_zero_net_tanh_outputs_zero(rng):
    net = MLP.zeros(MlpSpec((5, 4, 3)))
    np.testing.assert_array_equal(net.forward(rng.normal(size=5)), np.zeros(3))


def test_identity_linear_layer(rng):
    net = MLP(MlpSpec((4, 4), output_activation="none"), [np.eye(4)], [np.zeros(4)])
    x = rng.normal(size=4)
    np.testing.assert_array_equal(net.forward(x), x)


def test_forward_pure_and_bounded(rng):
    net = MLP.init(MlpSpec((6, 8, 8, 3)), rng, final_scale=50.0)
    x = rng.normal(size=(10, 6))
    before = net.flat.copy()
    out1, out2 = net.forward(x), net.forward(x)
    np.testing.assert_array_equal(out1, out2)
    np.testing.assert_array_equal(net.flat, before)
    assert np.all(np.abs(out1) <= 1.0)


def test_shape_mismatch_raises(rng):
    net = MLP.init(MlpSpec((3, 2)), rng)
    with pytest.raises(ValueError):
        net.forward(np.zeros(4))


def test_init_bounds(rng):
    net = MLP.init(MlpSpec((100, 50, 2)), rng, final_scale=1e-3)
    assert np.abs(net.weights[0]).max() <= 0.1
    assert np.abs(net.weights[1]).max() <= 1e-3 / np.sqrt(50)


def test_zero_upstream_gives_zero_grads(rng):
    net = MLP.init(MlpSpec((4, 5, 2)), rng)
    grads, inp = gradients(net, rng.normal(size=4), np.zeros(2))
    assert all(not g.any() for g in grads) and not inp.any()


def test_linear_squared_error_hand_derivative(rng):
    w, b = rng.normal(size=(3, 2)), rng.normal(size=2)
    net = MLP(MlpSpec((3, 2), output_activation="none"), [w], [b])
    x, target = rng.normal(size=3), rng.normal(size=2)
    out = net.forward(x)
    grads, _ = gradients(net, x, 2 * (out - target))
    np.testing.assert_allclose(grads[0], np.outer(x, 2 * (out - target)))
    np.testing.assert_allclose(grads[1], 2 * (out - target))


def test_finite_difference_h_1e5(rng):
    net = MLP.init(MlpSpec((4, 6, 5, 3)), rng)
    x, up = rng.normal(size=(3, 4)), rng.normal(size=(3, 3))
    grads, _ = gradients(net, x, up)
    num = numeric_gradient(lambda: float(np.sum(up * net.forward(x))), net.parameters(), h=1e-5)
    for a, n in zip(grads, num):
        assert np.max(np.abs(a - n) / np.maximum(1e-8, np.abs(a) + np.abs(n))) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_property(seed):
    assert mlp_gradient_error(np.random.default_rng(seed)) < 1e-4


def test_adam_zero_grad_no_change():
    p = np.array([1.0, -2.0])
    opt = Adam([p], 2e-4)
    opt.step([p], [np.zeros(2)])
    np.testing.assert_array_equal(p, [1.0, -2.0])
    assert opt.t == 1


def test_adam_first_step():
    p = np.array([0.5])
    opt = Adam([p], 2e-4)
    opt.step([p], [np.array([1.0])])
    # m_hat = v_hat = 1, so the step is lr / (1 + eps)
    assert p[0] == pytest.approx(0.5 - 2e-4 / (1 + 1e-8), abs=1e-15)


def test_adam_opposes_gradient_sign(rng):
    net = MLP.init(MlpSpec((3, 4, 2)), rng)
    before = net.flat.copy()
    grads = [rng.normal(size=p.shape) for p in net.parameters()]
    opt = Adam([net.flat], 1e-3)
    adam_step(net, grads, opt)
    flat_g = np.concatenate([g.ravel() for g in grads])
    assert np.all(np.sign(net.flat - before) == -np.sign(flat_g))


def test_soft_update_examples(rng):
    spec = MlpSpec((2, 3, 1))
    src = MLP.init(spec, rng)
    tgt = MLP.init(spec, rng)
    keep = tgt.flat.copy()
    soft_update(tgt, src, 0.0)
    np.testing.assert_array_equal(tgt.flat, keep)
    soft_update(tgt, src, 1.0)
    np.testing.assert_array_equal(tgt.flat, src.flat)
    zero, one = MLP.zeros(spec), MLP.zeros(spec)
    one.flat[:] = 1.0
    soft_update(zero, one, 1e-3)
    np.testing.assert_allclose(zero.flat, 1e-3)


def test_soft_update_geometric_convergence(rng):
    spec = MlpSpec((2, 3, 1))
    src, tgt = MLP.init(spec, rng), MLP.init(spec, rng)
    gap0 = tgt.flat - src.flat
    for _ in range(100):
        soft_update(tgt, src, 0.05)
    np.testing.assert_allclose(tgt.flat - src.flat, gap0 * 0.95 ** 100, atol=1e-12)


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    net = MLP.init(MlpSpec((3, 4, 2)), rng)
    opt = Adam([net.flat], 1e-3)
    adam_step(net, [rng.normal(size=p.shape) for p in net.parameters()], opt)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, {"a": net}, {"a": opt}, {"note": "x"})
    nets, opts, meta = load_checkpoint(path)
    assert meta == {"note": "x"}
    assert nets["a"].spec == net.spec
    np.testing.assert_array_equal(nets["a"].flat, net.flat)
    assert opts["a"].t == 1
    np.testing.assert_array_equal(opts["a"].m[0], opt.m[0])
    np.testing.assert_array_equal(opts["a"].v[0], opt.v[0])
    save_checkpoint(tmp_path / "again.npz", nets, opts, meta)
    assert (tmp_path / "again.npz").read_bytes() == path.read_bytes()
