"""Walk through the loss family: classification, adversarial, kernel, MI.

Run: python3 demos/loss_tour.py
"""

import numpy as np

from bridgeda import (
    KernelSpec,
    Tensor,
    cross_entropy,
    cycle_consistency,
    domain_identifier_loss,
    entropy_confusion_loss,
    fit_mine,
    gan_pair_losses,
    median_heuristic,
    mmd_squared,
)
from bridgeda import tensor as T


def classification():
    print("== cross entropy rewards the right logit ==")
    logits = np.array([[4.0, 0.0, 0.0], [0.0, 4.0, 0.0]])
    print("correct labels ", cross_entropy(Tensor(logits), [0, 1]).item())
    print("swapped labels ", cross_entropy(Tensor(logits), [1, 0]).item())

    print("\n== entropy confusion prefers undecided predictions ==")
    sharp = T.softmax(Tensor(np.array([[6.0, 0.0, 0.0]])), axis=1)
    flat = T.softmax(Tensor(np.zeros((1, 3))), axis=1)
    print("sharp", entropy_confusion_loss(sharp).item(), " flat", entropy_confusion_loss(flat).item())


def adversarial():
    print("\n== domain identifier and GAN pair ==")
    probs = np.array([0.9, 0.8, 0.2, 0.1])
    domains = np.array([1.0, 1.0, 0.0, 0.0])
    print("confident identifier loss", domain_identifier_loss(probs, domains).item())
    d_loss, g_loss = gan_pair_losses(np.array([0.9, 0.95]), np.array([0.1, 0.2]))
    print("discriminator ahead: d", round(d_loss.item(), 3), " g", round(g_loss.item(), 3))

    print("\n== cycle consistency is a plain round-trip L1 ==")
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    print("perfect", cycle_consistency(x, x.copy()).item(),
          " off by 0.5 each:", cycle_consistency(x, x + 0.5).item())


def kernel_distance():
    print("\n== mmd separates what a mean cannot ==")
    rng = np.random.default_rng(1)
    ring_angle = rng.uniform(0, 2 * np.pi, size=400)
    ring = np.stack([np.cos(ring_angle), np.sin(ring_angle)], axis=1)
    blob = rng.normal(scale=0.7071, size=(400, 2))  # same mean, similar scale
    kernel = median_heuristic(ring, blob)
    print("kernel bandwidths", np.round(kernel.bandwidths, 3))
    print("mmd2 ring vs blob", mmd_squared(Tensor(ring), Tensor(blob), kernel).item())
    print("mmd2 ring vs ring", mmd_squared(Tensor(ring), Tensor(ring.copy()), kernel).item())
    print("fixed kernel symmetry",
          mmd_squared(Tensor(ring), Tensor(blob), KernelSpec((1.0,))).item()
          == mmd_squared(Tensor(blob), Tensor(ring), KernelSpec((1.0,))).item())


def mutual_information():
    print("\n== MI estimate vs the Gaussian ground truth ==")
    rho = 0.8
    rng = np.random.default_rng(2)
    x = rng.normal(size=2000)
    y = rho * x + np.sqrt(1 - rho ** 2) * rng.normal(size=2000)
    est = fit_mine(x, y, steps=500, seed=0)
    print(f"rho={rho}: estimated {est:.3f}, analytic {-0.5 * np.log(1 - rho ** 2):.3f} nats")


if __name__ == "__main__":
    classification()
    adversarial()
    kernel_distance()
    mutual_information()
