"""Class prototypes, distance-softmax classification, pseudo-labeling.

Prototypes are per-class embedding means. Classification scores a query
by softmax over negative squared Euclidean distances to the valid
prototypes. Pseudo-labels accept a sample once the classifier's top
probability clears a confidence threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import tensor as T
from .errors import ContractError, DimensionError, EstimationError, LabelError
from .tensor import Tensor


@dataclass(frozen=True)
class PrototypeSet:
    """Per-class mean embeddings with their supporting sample counts.

    Rows of `prototypes` with count zero are placeholders (zeros) and are
    excluded from classification.
    """

    prototypes: np.ndarray
    counts: np.ndarray
    domain_tag: str = ""

    def __post_init__(self):
        p = np.asarray(self.prototypes, dtype=np.float64)
        c = np.asarray(self.counts, dtype=np.int64)
        if p.ndim != 2:
            raise DimensionError(f"PrototypeSet: prototypes must be (k, m), got {p.shape}")
        if c.shape != (p.shape[0],):
            raise DimensionError(
                f"PrototypeSet: counts shape {c.shape} does not match {p.shape[0]} classes"
            )
        if np.any(c < 0):
            raise ContractError("PrototypeSet: counts must be non-negative")
        object.__setattr__(self, "prototypes", p)
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def valid_mask(self) -> np.ndarray:
        return self.counts > 0


def compute_prototypes(embeddings, labels, n_classes: int, domain_tag: str = "") -> PrototypeSet:
    """Mean embedding per class; classes absent from `labels` get count 0."""
    emb = np.asarray(embeddings.data if isinstance(embeddings, Tensor) else embeddings,
                     dtype=np.float64)
    if emb.ndim != 2:
        raise DimensionError(f"compute_prototypes: embeddings must be (n, m), got {emb.shape}")
    lab = np.asarray(labels)
    if lab.shape != (emb.shape[0],):
        raise DimensionError(
            f"compute_prototypes: labels shape {lab.shape} does not match {emb.shape[0]} rows"
        )
    if n_classes <= 0:
        raise ContractError(f"compute_prototypes: n_classes must be positive, got {n_classes}")
    lab = lab.astype(np.int64)
    bad = np.nonzero((lab < 0) | (lab >= n_classes))[0]
    if bad.size:
        raise LabelError(
            f"compute_prototypes: label {labels[bad[0]]} at index {bad[0]} outside [0, {n_classes})"
        )
    protos = np.zeros((n_classes, emb.shape[1]))
    counts = np.zeros(n_classes, dtype=np.int64)
    for c in range(n_classes):
        mask = lab == c
        counts[c] = int(mask.sum())
        if counts[c]:
            protos[c] = emb[mask].mean(axis=0)
    return PrototypeSet(protos, counts, domain_tag)


def proto_classify(query, protos: PrototypeSet) -> Tuple[Tensor, np.ndarray]:
    """Class probabilities for one query embedding.

    Returns (probs, class_ids) where probs is softmax over the negative
    squared distances to each valid prototype and class_ids maps each
    probability back to its class index. Differentiable in the query.
    """
    q = query if isinstance(query, Tensor) else Tensor(query)
    if q.ndim != 1:
        raise DimensionError(f"proto_classify: query must be 1-d, got shape {q.shape}")
    valid = np.nonzero(protos.valid_mask)[0]
    if valid.size == 0:
        raise EstimationError("proto_classify: no valid prototypes")
    if protos.prototypes.shape[1] != q.shape[0]:
        raise DimensionError(
            f"proto_classify: query width {q.shape[0]} vs prototype width "
            f"{protos.prototypes.shape[1]}"
        )
    anchors = Tensor(protos.prototypes[valid])
    diff = T.reshape(q, (1, -1)) - anchors
    neg_sq = T.multiply(T.tsum(T.multiply(diff, diff), axis=1), Tensor(-1.0))
    return T.softmax(neg_sq, axis=0), valid


def ema_update(previous: PrototypeSet, fresh: PrototypeSet, momentum: float) -> PrototypeSet:
    """Blend prototype sets across refreshes.

    Rows valid in both blend as momentum * previous + (1 - momentum) * fresh;
    rows only fresh replace the placeholder; rows only previous persist.
    """
    if not 0.0 <= momentum < 1.0:
        raise ContractError(f"ema_update: momentum must lie in [0, 1), got {momentum}")
    if previous.prototypes.shape != fresh.prototypes.shape:
        raise DimensionError(
            f"ema_update: shapes differ, {previous.prototypes.shape} vs {fresh.prototypes.shape}"
        )
    protos = fresh.prototypes.copy()
    counts = fresh.counts.copy()
    both = previous.valid_mask & fresh.valid_mask
    protos[both] = momentum * previous.prototypes[both] + (1.0 - momentum) * fresh.prototypes[both]
    only_prev = previous.valid_mask & ~fresh.valid_mask
    protos[only_prev] = previous.prototypes[only_prev]
    counts[only_prev] = previous.counts[only_prev]
    return PrototypeSet(protos, counts, fresh.domain_tag or previous.domain_tag)


@dataclass(frozen=True)
class PseudoLabelBatch:
    """Accepted sample indices with their inferred labels and confidences."""

    indices: np.ndarray
    labels: np.ndarray
    confidences: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        lab = np.asarray(self.labels, dtype=np.int64)
        conf = np.asarray(self.confidences, dtype=np.float64)
        if not (idx.shape == lab.shape == conf.shape) or idx.ndim != 1:
            raise DimensionError("PseudoLabelBatch: fields must be equal-length vectors")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "confidences", conf)

    def __len__(self) -> int:
        return int(self.indices.shape[0])


def pseudo_label(embeddings, classifier_probs, threshold: float = 0.8) -> PseudoLabelBatch:
    """Accept samples whose top class probability reaches `threshold`.

    Labels are argmax rows (ties resolve to the lowest class index). The
    threshold must exceed chance level 1/k, else acceptance would be
    vacuous. An empty result is legitimate; callers decide how to skip.
    """
    emb = np.asarray(embeddings.data if isinstance(embeddings, Tensor) else embeddings,
                     dtype=np.float64)
    probs = np.asarray(
        classifier_probs.data if isinstance(classifier_probs, Tensor) else classifier_probs,
        dtype=np.float64,
    )
    if probs.ndim != 2:
        raise DimensionError(f"pseudo_label: probs must be (n, k), got {probs.shape}")
    if emb.ndim != 2 or emb.shape[0] != probs.shape[0]:
        raise DimensionError(
            f"pseudo_label: embeddings {emb.shape} do not pair with probs {probs.shape}"
        )
    k = probs.shape[1]
    if not (1.0 / k) < threshold <= 1.0:
        raise ContractError(
            f"pseudo_label: threshold must lie in (1/{k}, 1], got {threshold}"
        )
    top = probs.max(axis=1)
    accepted = np.nonzero(top >= threshold)[0]
    return PseudoLabelBatch(accepted, probs[accepted].argmax(axis=1), top[accepted])
