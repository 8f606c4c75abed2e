"""Class prototypes, nearest-prototype classification, and confident pseudo-labels.

Run: python3 demos/prototype_pseudolabels.py
"""

import numpy as np

from bridgeda import (
    Tensor,
    compute_prototypes,
    ema_update,
    proto_classify,
    pseudo_label,
)
from bridgeda import tensor as T


def prototypes_and_classify():
    print("== prototypes are per-class means ==")
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.0]])
    labels = rng.integers(0, 3, size=120)
    emb = centers[labels] + rng.normal(scale=0.4, size=(120, 2))
    protos = compute_prototypes(emb, labels, n_classes=3, domain_tag="source")
    for c in range(3):
        print(f"  class {c}: prototype {np.round(protos.prototypes[c], 2)}"
              f" from {protos.counts[c]} points (true center {centers[c]})")

    query = np.array([3.6, 0.4])
    probs, class_ids = proto_classify(query, protos)
    print("query", query, "-> class", class_ids[int(np.argmax(probs.data))],
          "probs", np.round(probs.data, 3))


def smoothing():
    print("\n== drifting features, smoothed prototypes ==")
    rng = np.random.default_rng(1)
    labels = np.tile(np.arange(2), 50)
    old = compute_prototypes(rng.normal(size=(100, 2)), labels, 2)
    fresh = compute_prototypes(rng.normal(size=(100, 2)) + 5.0, labels, 2)
    blended = ema_update(old, fresh, momentum=0.7)
    print("  old   ", np.round(old.prototypes[0], 2))
    print("  fresh ", np.round(fresh.prototypes[0], 2))
    print("  0.7 old + 0.3 fresh ", np.round(blended.prototypes[0], 2))


def confident_subset():
    print("\n== pseudo-labels keep only confident rows ==")
    rng = np.random.default_rng(2)
    emb = rng.normal(size=(8, 2))
    logits = rng.normal(size=(8, 3)) * 3.0
    probs = T.softmax(Tensor(logits), axis=1).data
    for threshold in (0.5, 0.8, 0.95):
        batch = pseudo_label(emb, probs, threshold=threshold)
        print(f"  threshold {threshold}: kept {len(batch)}/8 rows, labels {batch.labels}")


if __name__ == "__main__":
    prototypes_and_classify()
    smoothing()
    confident_subset()
