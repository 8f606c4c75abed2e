"""Networks and optimizer: initialization, forward math, Adam behavior."""

import numpy as np
import pytest

from bridgeda import tensor as T
from bridgeda.errors import ConfigError, TrainingError
from bridgeda.nn import Adam, Mlp, MlpSpec
from bridgeda.tensor import Tensor, backward


def test_init_deterministic_per_spec_and_seed():
    spec = MlpSpec((3, 8, 2))
    a, b = Mlp.init(spec, 5), Mlp.init(spec, 5)
    for pa, pb in zip(a.params, b.params):
        assert np.array_equal(pa.data, pb.data)
    c = Mlp.init(spec, 6)
    assert any(not np.array_equal(pa.data, pc.data) for pa, pc in zip(a.params, c.params))


def test_forward_matches_manual_chain():
    spec = MlpSpec((2, 4, 1), activation="tanh", final_activation="identity")
    net = Mlp.init(spec, 0)
    x = np.random.default_rng(1).normal(size=(5, 2))
    w0, b0, w1, b1 = [p.data for p in net.params]
    manual = np.tanh(x @ w0 + b0) @ w1 + b1
    assert np.allclose(net(Tensor(x)).data, manual)


def test_final_activation_sigmoid_bounds():
    net = Mlp.init(MlpSpec((3, 4, 1), final_activation="sigmoid"), 2)
    out = net(Tensor(np.random.default_rng(0).normal(size=(10, 3)) * 5)).data
    assert np.all((out > 0) & (out < 1))


def test_empty_hidden_is_linear_map():
    net = Mlp.init(MlpSpec((3, 2)), 1)
    x = np.random.default_rng(2).normal(size=(4, 3))
    w, b = net.params[0].data, net.params[1].data
    assert np.allclose(net(Tensor(x)).data, x @ w + b)


def test_bad_spec_rejected():
    with pytest.raises(ConfigError):
        MlpSpec((3,))
    with pytest.raises(ConfigError):
        MlpSpec((3, 0, 1))
    with pytest.raises(ConfigError):
        MlpSpec((3, 4, 1), activation="swish")


def test_adam_minimizes_quadratic():
    x = Tensor(np.array([5.0, -3.0]))
    opt = Adam([x], lr=0.1)
    for _ in range(300):
        opt.zero_grad()
        backward(T.sq_l2_norm(x))
        opt.step()
    assert np.all(np.abs(x.data) < 1e-2)


def test_adam_zero_gradient_leaves_params_bit_identical():
    net = Mlp.init(MlpSpec((2, 4, 1)), 3)
    before = [p.data.copy() for p in net.params]
    opt = Adam(net.params, lr=0.5)
    for p in net.params:
        p.grad = np.zeros_like(p.data)
    for _ in range(10):
        opt.step()
    for p, b in zip(net.params, before):
        assert np.array_equal(p.data, b)


def test_adam_none_grads_treated_as_zero():
    net = Mlp.init(MlpSpec((2, 3)), 4)
    before = [p.data.copy() for p in net.params]
    opt = Adam(net.params, lr=0.5)
    opt.zero_grad()
    opt.step()
    for p, b in zip(net.params, before):
        assert np.array_equal(p.data, b)


def test_adam_rejects_nonfinite_gradient():
    x = Tensor(np.array([1.0]))
    opt = Adam([x], lr=0.1)
    x.grad = np.array([np.nan])
    with pytest.raises(TrainingError):
        opt.step()


def test_param_arrays_reflect_updates():
    net = Mlp.init(MlpSpec((2, 2)), 0)
    arrays = net.param_arrays()
    assert all(np.array_equal(a, p.data) for a, p in zip(arrays, net.params))
