"""Build a computation graph by hand, differentiate it, and fit a tiny net.

Run: python3 demos/autodiff_basics.py
"""

import numpy as np

from bridgeda import Adam, Mlp, MlpSpec, Tensor, backward, grad_check
from bridgeda import tensor as T


def scalar_graph():
    print("== a scalar graph ==")
    x = Tensor(np.array([0.5, -1.2, 2.0]))
    y = T.tsum(T.tanh(x) * x + T.exp(T.multiply(x, Tensor(-1.0))))
    backward(y)
    print("value     ", y.item())
    print("dy/dx     ", x.grad)
    err = grad_check(
        lambda v: T.tsum(T.tanh(v) * v + T.exp(T.multiply(v, Tensor(-1.0)))),
        np.array([0.5, -1.2, 2.0]),
    )
    print("grad_check", err, "(max relative error vs central differences)")


def broadcasting():
    print("\n== broadcasting reduces correctly ==")
    w = Tensor(np.ones((1, 3)))
    x = Tensor(np.arange(12.0).reshape(4, 3))
    loss = T.tmean(T.multiply(x, w))
    backward(loss)
    print("w.grad shape", w.grad.shape, "= column means / 3:", w.grad.ravel())


def fit_sine():
    print("\n== fit sin(x) with a two-layer net ==")
    rng = np.random.default_rng(0)
    xs = rng.uniform(-np.pi, np.pi, size=(256, 1))
    ys = np.sin(xs)
    net = Mlp.init(MlpSpec((1, 32, 1), activation="tanh"), seed=0)
    opt = Adam(net.params, lr=1e-2)
    for step in range(400):
        opt.zero_grad()
        pred = net(xs)
        diff = pred - Tensor(ys)
        loss = T.tmean(T.multiply(diff, diff))
        backward(loss)
        opt.step()
        if step % 100 == 0 or step == 399:
            print(f"step {step:3d}  mse {loss.item():.5f}")
    grid = np.linspace(-np.pi, np.pi, 5).reshape(-1, 1)
    print("net  ", np.round(net(grid).data.ravel(), 3))
    print("truth", np.round(np.sin(grid).ravel(), 3))


if __name__ == "__main__":
    scalar_graph()
    broadcasting()
    fit_sine()
