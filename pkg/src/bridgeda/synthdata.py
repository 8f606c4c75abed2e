"""Synthetic domain generators and the dataset file format.

Domains are Gaussian class clusters whose means sit at seeded random
angles on a circle (minimum angular separation enforced, so a rotated
copy never lands back on itself by symmetry). A transform family
parameterized by a gap in [0, 1] produces the target at the full gap and
the bridge halfway. Labels for the shifted domains are returned only in
a sealed evaluation copy; the training views are unlabeled.

Datasets serialize to CSV with 17-significant-digit floats, so a write
followed by a read reproduces every value exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ContractError, DataFormatError, LabelError, ValidationError
from .rng import stream

DOMAIN_TAGS = ("source", "bridge", "target")


@dataclass(frozen=True)
class DomainDataset:
    """Feature rows for one domain, optionally labeled.

    `labels` is None for a fully unlabeled view; otherwise an int vector
    where -1 marks individually missing labels.
    """

    features: np.ndarray
    labels: Optional[np.ndarray]
    domain_tag: str

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2:
            raise ValidationError(f"DomainDataset: features must be (n, d), got {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValidationError("DomainDataset: features must be finite")
        if not self.domain_tag:
            raise ValidationError("DomainDataset: domain_tag must be non-empty")
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (feats.shape[0],):
                raise ValidationError(
                    f"DomainDataset: labels shape {labels.shape} does not match "
                    f"{feats.shape[0]} rows"
                )
            if np.any(labels < -1):
                raise LabelError("DomainDataset: labels must be >= -1")
            if np.all(labels == -1):
                labels = None
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def unlabeled(self) -> "DomainDataset":
        return DomainDataset(self.features, None, self.domain_tag)

    def require_labels(self) -> np.ndarray:
        if self.labels is None or np.any(self.labels < 0):
            raise LabelError(f"domain {self.domain_tag!r}: complete labels required")
        return self.labels


# ---------------------------------------------------------------------------
# classification triples


@dataclass(frozen=True)
class TripleSpec:
    """Recipe for a source / bridge / target classification triple.

    The transform family composes rotation (in the first two feature
    coordinates), scaling, translation, a linear blend toward swapped
    first coordinates, and additive feature noise. All of them scale
    linearly with the gap: the target sits at `gap`, the bridge at
    `gap / 2`, the source at zero.
    """

    n_classes: int
    n_features: int
    n_per_domain: int
    radius: float = 2.0
    sigma: float = 0.3
    rotation: float = 0.0
    scale: float = 1.0
    translation: Tuple[float, ...] = ()
    feature_noise: float = 0.0
    swap_coords: bool = False
    gap: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigError(f"TripleSpec.n_classes must be >= 2, got {self.n_classes}")
        if self.n_features < 2:
            raise ConfigError(f"TripleSpec.n_features must be >= 2, got {self.n_features}")
        if self.n_per_domain < self.n_classes:
            raise ConfigError(
                f"TripleSpec.n_per_domain must cover every class, got {self.n_per_domain}"
            )
        if self.radius <= 0:
            raise ConfigError(f"TripleSpec.radius must be positive, got {self.radius}")
        if self.sigma <= 0:
            raise ConfigError(f"TripleSpec.sigma must be positive, got {self.sigma}")
        if self.scale <= 0:
            raise ConfigError(f"TripleSpec.scale must be positive, got {self.scale}")
        if self.feature_noise < 0:
            raise ConfigError(
                f"TripleSpec.feature_noise must be non-negative, got {self.feature_noise}"
            )
        if not 0.0 <= self.gap <= 1.0:
            raise ConfigError(f"TripleSpec.gap must lie in [0, 1], got {self.gap}")
        if self.seed < 0:
            raise ConfigError(f"TripleSpec.seed must be non-negative, got {self.seed}")
        trans = tuple(float(v) for v in self.translation)
        if trans and len(trans) != self.n_features:
            raise ConfigError(
                f"TripleSpec.translation needs {self.n_features} entries, got {len(trans)}"
            )
        object.__setattr__(self, "translation", trans)


@dataclass(frozen=True)
class DomainTriple:
    """Training views plus sealed labeled copies of the shifted domains."""

    source: DomainDataset
    bridge: DomainDataset
    target: DomainDataset
    sealed: Dict[str, DomainDataset]


def _circular_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(a - b) % (2.0 * math.pi)
    return np.minimum(d, 2.0 * math.pi - d)


def _class_angles(spec: TripleSpec) -> np.ndarray:
    """Seeded random mean angles with separation and path clearance.

    Two rejections keep the benchmark well posed: means stay at least
    pi/K apart, and when the family rotates, no mean moved along the
    path (at gap/2 and gap) may land on a different class's original
    position. Without the second constraint a large rotation can alias
    one class onto another and the interpolated bridge stops being
    intermediate.
    """
    rng = stream(spec.seed, "class-angles")
    min_sep = math.pi / spec.n_classes
    clearance = min(0.3, min_sep / 2.0)
    steps = [t * spec.gap for t in (0.5, 1.0) if t * spec.gap > 0] if spec.rotation else []
    for trial in range(5000):
        if trial and trial % 500 == 0:
            min_sep *= 0.85
            clearance *= 0.85
        angles = np.sort(rng.uniform(0.0, 2.0 * math.pi, size=spec.n_classes))
        gaps = np.diff(np.concatenate([angles, [angles[0] + 2.0 * math.pi]]))
        if not np.all(gaps >= min_sep):
            continue
        ok = True
        for t in steps:
            moved = angles + t * spec.rotation
            dist = _circular_gap(moved[:, None], angles[None, :])
            np.fill_diagonal(dist, np.inf)
            if dist.min() < clearance:
                ok = False
                break
        if ok:
            return angles
    raise ContractError("class angle sampling failed to separate; seed exhausted retries")


def class_means(spec: TripleSpec) -> np.ndarray:
    angles = _class_angles(spec)
    means = np.zeros((spec.n_classes, spec.n_features))
    means[:, 0] = spec.radius * np.cos(angles)
    means[:, 1] = spec.radius * np.sin(angles)
    return means


def _balanced_labels(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    base, extra = divmod(n, k)
    labels = np.concatenate([np.full(base + (c < extra), c, dtype=np.int64) for c in range(k)])
    return labels[rng.permutation(n)]


def apply_transform(points: np.ndarray, t: float, spec: TripleSpec,
                    noise_rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Shift a point cloud a fraction `t` of the way along the family."""
    out = np.array(points, dtype=np.float64)
    theta = t * spec.rotation
    if theta:
        c, s = math.cos(theta), math.sin(theta)
        x0, x1 = out[:, 0].copy(), out[:, 1].copy()
        out[:, 0] = c * x0 - s * x1
        out[:, 1] = s * x0 + c * x1
    out *= 1.0 + t * (spec.scale - 1.0)
    if spec.translation:
        out += t * np.asarray(spec.translation)
    if spec.swap_coords and t:
        swapped = out.copy()
        swapped[:, [0, 1]] = swapped[:, [1, 0]]
        out = (1.0 - t) * out + t * swapped
    if spec.feature_noise and t and noise_rng is not None:
        out += noise_rng.normal(scale=t * spec.feature_noise, size=out.shape)
    return out


def gen_domain_triple(spec: TripleSpec) -> DomainTriple:
    """Generate the three domains; bit-identical for identical specs.

    Each domain draws fresh samples from the class layout, then moves
    them along the transform family (source at 0, bridge at gap/2,
    target at gap). Per-class counts are balanced within one sample.
    The bridge and target views come back unlabeled; their labels sit
    only in the sealed copies.
    """
    means = class_means(spec)
    gaps = {"source": 0.0, "bridge": spec.gap / 2.0, "target": spec.gap}
    built: Dict[str, DomainDataset] = {}
    for tag in DOMAIN_TAGS:
        rng = stream(spec.seed, f"samples-{tag}")
        labels = _balanced_labels(spec.n_per_domain, spec.n_classes, rng)
        base = means[labels] + rng.normal(scale=spec.sigma, size=(spec.n_per_domain, spec.n_features))
        noise_rng = stream(spec.seed, f"noise-{tag}")
        feats = apply_transform(base, gaps[tag], spec, noise_rng)
        built[tag] = DomainDataset(feats, labels, tag)
    return DomainTriple(
        source=built["source"],
        bridge=built["bridge"].unlabeled(),
        target=built["target"].unlabeled(),
        sealed={"bridge": built["bridge"], "target": built["target"]},
    )


# ---------------------------------------------------------------------------
# 2-d point-set translation tasks


@dataclass(frozen=True)
class PointFamily:
    """One named 2-d point distribution.

    kind "ring": circle of `radius` with radial `noise`.
    kind "grid": lattice of `pitch` within [-extent, extent]^2, jittered
    by `noise`.
    kind "mixture": `components` Gaussian blobs of width `sigma` evenly
    spaced on a circle of `radius`, rotated by `rotation`.
    """

    kind: str
    radius: float = 1.0
    noise: float = 0.02
    pitch: float = 0.5
    extent: float = 1.0
    components: int = 8
    sigma: float = 0.05
    rotation: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ring", "grid", "mixture"):
            raise ConfigError(f"PointFamily.kind must be ring, grid or mixture, got {self.kind!r}")
        if self.kind in ("ring", "mixture") and self.radius <= 0:
            raise ConfigError(f"PointFamily.radius must be positive, got {self.radius}")
        if self.noise < 0:
            raise ConfigError(f"PointFamily.noise must be non-negative, got {self.noise}")
        if self.kind == "grid":
            if self.pitch <= 0:
                raise ConfigError(f"PointFamily.pitch must be positive, got {self.pitch}")
            if self.extent < self.pitch:
                raise ConfigError("PointFamily.extent must be at least one pitch")
        if self.kind == "mixture":
            if self.components < 1:
                raise ConfigError(
                    f"PointFamily.components must be >= 1, got {self.components}"
                )
            if self.sigma <= 0:
                raise ConfigError(f"PointFamily.sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class TranslationTaskSpec:
    """Recipe for a source / bridge / target point translation task."""

    source: PointFamily
    bridge: PointFamily
    target: PointFamily
    n_per_domain: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.n_per_domain < 64:
            raise ConfigError(
                f"TranslationTaskSpec.n_per_domain must be >= 64, got {self.n_per_domain}"
            )
        if self.seed < 0:
            raise ConfigError(f"TranslationTaskSpec.seed must be non-negative, got {self.seed}")


def _sample_family(fam: PointFamily, n: int, rng: np.random.Generator) -> np.ndarray:
    if fam.kind == "ring":
        angle = rng.uniform(0.0, 2.0 * math.pi, size=n)
        r = fam.radius + rng.normal(scale=fam.noise, size=n) if fam.noise else np.full(n, fam.radius)
        return np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)
    if fam.kind == "grid":
        half = int(math.floor(fam.extent / fam.pitch))
        axis = np.arange(-half, half + 1) * fam.pitch
        sites = np.stack(np.meshgrid(axis, axis), axis=-1).reshape(-1, 2)
        picks = rng.integers(0, sites.shape[0], size=n)
        pts = sites[picks]
        if fam.noise:
            pts = pts + rng.normal(scale=fam.noise, size=pts.shape)
        return pts
    angles = 2.0 * math.pi * np.arange(fam.components) / fam.components + fam.rotation
    centers = fam.radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    picks = rng.integers(0, fam.components, size=n)
    return centers[picks] + rng.normal(scale=fam.sigma, size=(n, 2))


def gen_translation_task(spec: TranslationTaskSpec) -> Dict[str, DomainDataset]:
    """Three unlabeled 2-d point sets keyed by domain tag; deterministic."""
    families = {"source": spec.source, "bridge": spec.bridge, "target": spec.target}
    out: Dict[str, DomainDataset] = {}
    for tag in DOMAIN_TAGS:
        rng = stream(spec.seed, f"points-{tag}")
        out[tag] = DomainDataset(_sample_family(families[tag], spec.n_per_domain, rng), None, tag)
    return out


# ---------------------------------------------------------------------------
# file format


def _format_row(tag: str, label: int, feats: np.ndarray) -> str:
    values = ",".join(f"{v:.17g}" for v in feats)
    return f"{tag},{label},{values}"


def write_dataset(path, dataset: DomainDataset) -> None:
    """Write one domain to CSV (see module docstring for the format)."""
    write_datasets(path, [dataset])


def write_datasets(path, datasets: Sequence[DomainDataset]) -> None:
    """Write several domains into one CSV file, sharing a header."""
    if not datasets:
        raise ContractError("write_datasets: nothing to write")
    dim = datasets[0].dim
    if any(ds.dim != dim for ds in datasets):
        raise ValidationError("write_datasets: feature widths differ between domains")
    header = "domain,label," + ",".join(f"f{i}" for i in range(dim))
    lines = [header]
    for ds in datasets:
        labels = ds.labels if ds.labels is not None else np.full(ds.n, -1, dtype=np.int64)
        for row, label in zip(ds.features, labels):
            lines.append(_format_row(ds.domain_tag, int(label), row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_dataset_groups(path) -> Dict[str, DomainDataset]:
    """Parse a dataset CSV into one DomainDataset per domain tag."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:2] != ["domain", "label"] or len(header) < 3:
        raise DataFormatError(f"{path}: line 1: header must be domain,label,f0,...")
    expected = ["f" + str(i) for i in range(len(header) - 2)]
    if header[2:] != expected:
        raise DataFormatError(f"{path}: line 1: feature columns must be f0..f{len(header) - 3}")
    dim = len(header) - 2
    rows: Dict[str, List] = {}
    order: List[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            raise DataFormatError(f"{path}: line {lineno}: blank line")
        parts = line.split(",")
        if len(parts) != dim + 2:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {dim + 2} fields, got {len(parts)}"
            )
        tag = parts[0]
        if not tag:
            raise DataFormatError(f"{path}: line {lineno}: empty domain tag")
        try:
            label = int(parts[1])
        except ValueError:
            raise DataFormatError(f"{path}: line {lineno}: label {parts[1]!r} is not an integer")
        if label < -1:
            raise DataFormatError(f"{path}: line {lineno}: label {label} below -1")
        try:
            feats = [float(v) for v in parts[2:]]
        except ValueError:
            raise DataFormatError(f"{path}: line {lineno}: malformed feature value")
        if not all(math.isfinite(v) for v in feats):
            raise DataFormatError(f"{path}: line {lineno}: non-finite feature value")
        if tag not in rows:
            rows[tag] = []
            order.append(tag)
        rows[tag].append((label, feats))
    out: Dict[str, DomainDataset] = {}
    for tag in order:
        labels = np.array([r[0] for r in rows[tag]], dtype=np.int64)
        feats = np.array([r[1] for r in rows[tag]], dtype=np.float64)
        out[tag] = DomainDataset(feats, None if np.all(labels == -1) else labels, tag)
    return out


def read_dataset(path) -> DomainDataset:
    """Parse a single-domain dataset CSV.

    Files holding several domains (such as sealed label files) go
    through read_dataset_groups instead.
    """
    groups = read_dataset_groups(path)
    if len(groups) != 1:
        raise ValidationError(
            f"{path}: holds domains {sorted(groups)}; use read_dataset_groups for mixed files"
        )
    return next(iter(groups.values()))
