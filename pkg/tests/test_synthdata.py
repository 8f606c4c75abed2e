"""Synthetic benchmarks: generation properties and the dataset file format."""

import numpy as np
import pytest

from bridgeda.errors import ConfigError, DataFormatError, LabelError, ValidationError
from bridgeda.losses import KernelSpec, mmd_squared
from bridgeda.synthdata import (
    DomainDataset,
    PointFamily,
    TranslationTaskSpec,
    TripleSpec,
    gen_domain_triple,
    gen_translation_task,
    read_dataset,
    read_dataset_groups,
    write_dataset,
    write_datasets,
)
from bridgeda.tensor import Tensor


def _mmd(a, b):
    return mmd_squared(Tensor(a), Tensor(b), KernelSpec((1.0,))).item()


class TestTripleGeneration:
    def test_same_spec_same_seed_bit_identical(self):
        spec = TripleSpec(n_classes=3, n_features=2, n_per_domain=90,
                          rotation=45.0, seed=4)
        a, b = gen_domain_triple(spec), gen_domain_triple(spec)
        for da, db in ((a.source, b.source), (a.bridge, b.bridge), (a.target, b.target)):
            assert np.array_equal(da.features, db.features)

    def test_class_balance_within_one(self):
        spec = TripleSpec(n_classes=4, n_features=2, n_per_domain=103, seed=0)
        tri = gen_domain_triple(spec)
        counts = np.bincount(tri.source.labels, minlength=4)
        assert counts.max() - counts.min() <= 1

    def test_zero_gap_domains_indistinguishable(self):
        spec = TripleSpec(n_classes=4, n_features=2, n_per_domain=400,
                          rotation=100.0, gap=0.0, seed=1)
        tri = gen_domain_triple(spec)
        n = spec.n_per_domain
        assert _mmd(tri.source.features, tri.target.features) < 3.0 / np.sqrt(n)

    def test_gap_monotone_in_source_target_distance(self):
        values = []
        for gap in (0.0, 0.25, 0.5, 1.0):
            spec = TripleSpec(n_classes=4, n_features=2, n_per_domain=400,
                              rotation=100.0, gap=gap, seed=2)
            tri = gen_domain_triple(spec)
            values.append(_mmd(tri.source.features, tri.target.features))
        assert all(b >= a - 1e-9 for a, b in zip(values, values[1:]))

    def test_bridge_and_target_views_are_unlabeled(self):
        tri = gen_domain_triple(TripleSpec(n_classes=2, n_features=2,
                                           n_per_domain=20, seed=0))
        assert tri.bridge.labels is None
        assert tri.target.labels is None
        assert set(tri.sealed) == {"bridge", "target"}
        assert tri.sealed["bridge"].labels is not None
        with pytest.raises(LabelError):
            tri.target.require_labels()

    def test_invalid_spec_names_field(self):
        with pytest.raises(ConfigError, match="n_classes"):
            TripleSpec(n_classes=1, n_features=2, n_per_domain=10)
        with pytest.raises(ConfigError, match="gap"):
            TripleSpec(n_classes=2, n_features=2, n_per_domain=10, gap=1.5)
        with pytest.raises(ConfigError, match="translation"):
            TripleSpec(n_classes=2, n_features=2, n_per_domain=10,
                       translation=(1.0,))


class TestTranslationTask:
    def test_ring_radii_strictly_between(self):
        spec = TranslationTaskSpec(
            source=PointFamily("ring", radius=1.0),
            bridge=PointFamily("ring", radius=2.0),
            target=PointFamily("ring", radius=3.0),
            n_per_domain=300, seed=0,
        )
        task = gen_translation_task(spec)
        radii = {k: float(np.mean(np.linalg.norm(v.features, axis=1)))
                 for k, v in task.items()}
        assert radii["source"] < radii["bridge"] < radii["target"]

    def test_deterministic(self):
        spec = TranslationTaskSpec(
            source=PointFamily("mixture", components=8),
            bridge=PointFamily("mixture", components=8, rotation=np.pi / 8),
            target=PointFamily("mixture", components=8, rotation=np.pi / 4),
            n_per_domain=128, seed=5,
        )
        a, b = gen_translation_task(spec), gen_translation_task(spec)
        for key in ("source", "bridge", "target"):
            assert np.array_equal(a[key].features, b[key].features)

    def test_rotated_mixture_bridge_ordering(self):
        spec = TranslationTaskSpec(
            source=PointFamily("mixture", components=8, sigma=0.05),
            bridge=PointFamily("mixture", components=8, sigma=0.05, rotation=np.pi / 8),
            target=PointFamily("mixture", components=8, sigma=0.05, rotation=np.pi / 4),
            n_per_domain=400, seed=0,
        )
        task = gen_translation_task(spec)
        s, b, t = (task[k].features for k in ("source", "bridge", "target"))
        assert _mmd(s, b) < _mmd(s, t)
        assert _mmd(b, t) < _mmd(s, t)

    def test_unknown_family_kind(self):
        with pytest.raises(ConfigError):
            PointFamily("doughnut")


class TestDatasetFiles:
    def test_round_trip_exact(self, tmp_path):
        tri = gen_domain_triple(TripleSpec(n_classes=3, n_features=4,
                                           n_per_domain=50, rotation=30.0, seed=7))
        path = tmp_path / "source.csv"
        write_dataset(path, tri.source)
        back = read_dataset(path)
        assert np.array_equal(back.features, tri.source.features)
        assert np.array_equal(back.labels, tri.source.labels)
        assert back.domain_tag == tri.source.domain_tag

    def test_unlabeled_sentinel_round_trip(self, tmp_path):
        ds = DomainDataset(np.array([[1.5, -2.0]]), None, "target")
        path = tmp_path / "t.csv"
        write_dataset(path, ds)
        text = path.read_text()
        assert ",-1," in text.splitlines()[1]
        assert read_dataset(path).labels is None

    def test_hand_written_fixture(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("domain,label,f0,f1\nsource,0,1.5,-2.25\nsource,1,0,3\n")
        ds = read_dataset(path)
        assert np.array_equal(ds.features, [[1.5, -2.25], [0.0, 3.0]])
        assert list(ds.labels) == [0, 1]

    def test_groups_file(self, tmp_path):
        tri = gen_domain_triple(TripleSpec(n_classes=2, n_features=2,
                                           n_per_domain=10, seed=1))
        path = tmp_path / "sealed.csv"
        write_datasets(path, [tri.sealed["bridge"], tri.sealed["target"]])
        groups = read_dataset_groups(path)
        assert set(groups) == {"bridge", "target"}
        with pytest.raises(ValidationError):
            read_dataset(path)

    def test_malformed_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("domain,label,f0\nsource,0,1.0\nsource,zero,2.0\n")
        with pytest.raises(DataFormatError, match="line 3"):
            read_dataset(path)

    def test_label_below_sentinel_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("domain,label,f0\nsource,-2,1.0\n")
        with pytest.raises(DataFormatError):
            read_dataset(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,domain,f0\nsource,0,1.0\n")
        with pytest.raises(DataFormatError, match="line 1"):
            read_dataset(path)

    def test_non_finite_feature_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("domain,label,f0\nsource,0,nan\n")
        with pytest.raises(DataFormatError):
            read_dataset(path)
