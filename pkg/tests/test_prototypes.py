"""Prototype computation, nearest-prototype classification, pseudo-labels."""

import numpy as np
import pytest

from bridgeda.errors import ContractError, DimensionError, EstimationError, LabelError
from bridgeda.prototypes import (
    PrototypeSet,
    compute_prototypes,
    ema_update,
    proto_classify,
    pseudo_label,
)
from bridgeda.tensor import Tensor


def _rng(seed=0):
    return np.random.default_rng(seed)


class TestComputePrototypes:
    def test_matches_per_class_means_exactly(self):
        rng = _rng(1)
        emb = rng.normal(size=(30, 4))
        labels = rng.integers(0, 3, size=30)
        protos = compute_prototypes(emb, labels, 3, "source")
        for c in range(3):
            rows = emb[labels == c]
            assert np.array_equal(protos.prototypes[c], rows.mean(axis=0))
            assert protos.counts[c] == rows.shape[0]

    def test_missing_class_marked_invalid(self):
        emb = np.ones((4, 2))
        labels = np.array([0, 0, 2, 2])
        protos = compute_prototypes(emb, labels, 3)
        assert list(protos.valid_mask) == [True, False, True]

    def test_label_out_of_range(self):
        with pytest.raises(LabelError):
            compute_prototypes(np.ones((2, 2)), np.array([0, 5]), 3)

    def test_deterministic_function_of_inputs(self):
        emb = _rng(2).normal(size=(12, 3))
        labels = _rng(3).integers(0, 2, size=12)
        a = compute_prototypes(emb, labels, 2)
        b = compute_prototypes(emb.copy(), labels.copy(), 2)
        assert np.array_equal(a.prototypes, b.prototypes)


class TestProtoClassify:
    def test_hand_softmax_on_two_point_fixture(self):
        protos = compute_prototypes(
            np.array([[0.0], [1.0]]), np.array([0, 1]), 2
        )
        query = np.array([0.25])
        probs, ids = proto_classify(query, protos)
        d = np.array([0.25 ** 2, 0.75 ** 2])
        manual = np.exp(-d) / np.exp(-d).sum()
        assert np.all(np.abs(probs.data - manual) < 1e-12)
        assert list(ids) == [0, 1]

    def test_skips_invalid_prototypes(self):
        protos = compute_prototypes(
            np.array([[0.0], [4.0]]), np.array([0, 0]), 3
        )
        probs, ids = proto_classify(np.array([1.0]), protos)
        assert list(ids) == [0]
        assert np.isclose(probs.data.sum(), 1.0)

    def test_no_valid_prototype(self):
        empty = PrototypeSet(np.zeros((2, 1)), np.zeros(2, dtype=np.int64), "x")
        with pytest.raises(EstimationError):
            proto_classify(np.array([0.0]), empty)

    def test_dimension_mismatch(self):
        protos = compute_prototypes(np.ones((2, 3)), np.array([0, 1]), 2)
        with pytest.raises(DimensionError):
            proto_classify(np.array([1.0]), protos)


class TestEmaUpdate:
    def test_blends_where_both_valid(self):
        prev = compute_prototypes(np.array([[0.0], [2.0]]), np.array([0, 1]), 2)
        fresh = compute_prototypes(np.array([[4.0], [6.0]]), np.array([0, 1]), 2)
        out = ema_update(prev, fresh, momentum=0.75)
        assert np.allclose(out.prototypes[:, 0], [0.75 * 0.0 + 0.25 * 4.0,
                                                  0.75 * 2.0 + 0.25 * 6.0])

    def test_keeps_previous_when_fresh_missing(self):
        prev = compute_prototypes(np.array([[1.0], [3.0]]), np.array([0, 1]), 2)
        fresh = compute_prototypes(np.array([[5.0]]), np.array([0]), 2)
        out = ema_update(prev, fresh, momentum=0.5)
        assert out.prototypes[1, 0] == 3.0
        assert out.valid_mask[1]

    def test_adopts_fresh_when_previous_missing(self):
        prev = compute_prototypes(np.array([[1.0]]), np.array([0]), 2)
        fresh = compute_prototypes(np.array([[2.0], [8.0]]), np.array([0, 1]), 2)
        out = ema_update(prev, fresh, momentum=0.5)
        assert out.prototypes[1, 0] == 8.0

    def test_momentum_domain(self):
        prev = compute_prototypes(np.array([[1.0]]), np.array([0]), 1)
        with pytest.raises(ContractError):
            ema_update(prev, prev, momentum=1.0)
        with pytest.raises(ContractError):
            ema_update(prev, prev, momentum=-0.1)


class TestPseudoLabel:
    def test_threshold_selects_confident_rows(self):
        emb = np.arange(8.0).reshape(4, 2)
        probs = np.array([
            [0.95, 0.05],
            [0.60, 0.40],
            [0.10, 0.90],
            [0.85, 0.15],
        ])
        batch = pseudo_label(emb, probs, threshold=0.8)
        assert list(batch.indices) == [0, 2, 3]
        assert list(batch.labels) == [0, 1, 0]
        assert np.allclose(batch.confidences, [0.95, 0.90, 0.85])
        assert len(batch) == 3

    def test_none_selected_is_empty_not_error(self):
        probs = np.full((3, 4), 0.25)
        batch = pseudo_label(np.ones((3, 2)), probs, threshold=0.9)
        assert len(batch) == 0

    def test_threshold_must_beat_chance(self):
        probs = np.full((2, 4), 0.25)
        with pytest.raises(ContractError):
            pseudo_label(np.ones((2, 2)), probs, threshold=0.25)
        with pytest.raises(ContractError):
            pseudo_label(np.ones((2, 2)), probs, threshold=1.1)

    def test_row_count_mismatch(self):
        with pytest.raises(DimensionError):
            pseudo_label(np.ones((3, 2)), np.full((2, 2), 0.5), threshold=0.8)
