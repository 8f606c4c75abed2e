"""Distribution distance estimation between feature sets.

Two estimators: a proxy A-distance built from the held-out error of a
small two-sample classifier, and the kernel mmd_squared shared with the
training losses. `validate_bridge` checks that an intermediate domain
actually sits between two endpoints under a chosen metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import tensor as T
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    DimensionError,
    EstimationError,
)
from .losses import KernelSpec, domain_identifier_loss, median_heuristic, mmd_squared
from .nn import Adam, Mlp, MlpSpec
from .rng import stream
from .tensor import Tensor

METRICS = ("adist", "mmd")


@dataclass(frozen=True)
class DistanceReport:
    """One measured pair of feature sets, serializable as a metric record."""

    pair: Tuple[str, str]
    a_distance: float
    mmd2: float
    classifier_error: float
    n_folds: int

    def value(self, metric: str) -> float:
        if metric == "adist":
            return self.a_distance
        if metric == "mmd":
            return self.mmd2
        raise ConfigError(f"unknown metric {metric!r}, expected one of {METRICS}")

    def to_dict(self) -> Dict:
        return {
            "pair": list(self.pair),
            "a_distance": self.a_distance,
            "mmd2": self.mmd2,
            "classifier_error": self.classifier_error,
            "n_folds": self.n_folds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(obj: Dict) -> "DistanceReport":
        try:
            pair = obj["pair"]
            return DistanceReport(
                pair=(str(pair[0]), str(pair[1])),
                a_distance=float(obj["a_distance"]),
                mmd2=float(obj["mmd2"]),
                classifier_error=float(obj["classifier_error"]),
                n_folds=int(obj["n_folds"]),
            )
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed distance report: {exc}") from None


def a_distance_from_error(error: float) -> float:
    """Map a two-sample classification error to the proxy A-distance.

    The error is clamped into [0, 0.5] first; 0.5 (indistinguishable)
    maps to 0 and 0 (perfectly separable) maps to 2.
    """
    eps = min(max(float(error), 0.0), 0.5)
    return 2.0 * (1.0 - 2.0 * eps)


def _check_features(name: str, x) -> np.ndarray:
    arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DimensionError(f"{name}: expects a non-empty (n, d) feature array, got {arr.shape}")
    return arr


def proxy_a_distance(
    feats_a,
    feats_b,
    n_folds: int = 5,
    seed: int = 0,
    train_steps: int = 200,
    hidden: int = 32,
    lr: float = 1e-2,
    pair: Tuple[str, str] = ("a", "b"),
    kernel: Optional[KernelSpec] = None,
) -> DistanceReport:
    """Estimate domain distance from two-sample classifier error.

    The classes are balanced by subsampling the larger set, then a small
    sigmoid MLP is cross-validated over `n_folds`; the mean held-out
    error feeds a_distance_from_error. The report also carries
    mmd_squared over the same (balanced) features.
    """
    a = _check_features("proxy_a_distance", feats_a)
    b = _check_features("proxy_a_distance", feats_b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"proxy_a_distance: feature widths differ, {a.shape} vs {b.shape}"
        )
    if n_folds < 2:
        raise ConfigError(f"proxy_a_distance: n_folds must be >= 2, got {n_folds}")
    m = min(a.shape[0], b.shape[0])
    if m < n_folds:
        raise EstimationError(
            f"proxy_a_distance: need at least {n_folds} samples per set, got {m}"
        )
    rng = stream(seed, "a-distance")
    a_bal = a[rng.permutation(a.shape[0])[:m]]
    b_bal = b[rng.permutation(b.shape[0])[:m]]

    # one fold assignment per position, shared by both sets so folds stay balanced
    fold_of = np.tile(np.arange(n_folds), m // n_folds + 1)[:m]
    fold_of = fold_of[rng.permutation(m)]

    spec = MlpSpec((a.shape[1], hidden, 1), activation="leaky_relu", final_activation="sigmoid")
    errors = []
    for fold in range(n_folds):
        train_mask = fold_of != fold
        x_train = np.concatenate([a_bal[train_mask], b_bal[train_mask]], axis=0)
        y_train = np.concatenate(
            [np.zeros(int(train_mask.sum())), np.ones(int(train_mask.sum()))]
        )
        x_test = np.concatenate([a_bal[~train_mask], b_bal[~train_mask]], axis=0)
        y_test = np.concatenate(
            [np.zeros(int((~train_mask).sum())), np.ones(int((~train_mask).sum()))]
        )
        net = Mlp.init(spec, seed)
        opt = Adam(net.params, lr=lr)
        for _ in range(train_steps):
            opt.zero_grad()
            loss = domain_identifier_loss(net(x_train), y_train)
            T.backward(loss)
            opt.step()
        pred = (net(x_test).data.reshape(-1) >= 0.5).astype(np.float64)
        errors.append(float(np.mean(pred != y_test)))

    eps = float(np.mean(errors))
    if kernel is None:
        kernel = median_heuristic(a_bal, b_bal)
    mmd2 = float(mmd_squared(Tensor(a_bal), Tensor(b_bal), kernel).data)
    return DistanceReport(
        pair=tuple(pair),
        a_distance=a_distance_from_error(eps),
        mmd2=mmd2,
        classifier_error=eps,
        n_folds=n_folds,
    )


def validate_bridge(
    feats_source,
    feats_bridge,
    feats_target,
    metric: str = "adist",
    seed: int = 0,
    **kwargs,
) -> Tuple[bool, Tuple[DistanceReport, DistanceReport, DistanceReport]]:
    """Check that the bridge sits strictly between source and target.

    Measures the three pairs and returns (verdict, reports ordered
    (source,bridge), (bridge,target), (source,target)). The verdict is
    true when dist(source,bridge) < dist(source,target) and
    dist(bridge,target) < dist(source,target), strictly, under `metric`.
    """
    if metric not in METRICS:
        raise ConfigError(f"validate_bridge: metric must be one of {METRICS}, got {metric!r}")
    pairs = (
        (("source", "bridge"), feats_source, feats_bridge),
        (("bridge", "target"), feats_bridge, feats_target),
        (("source", "target"), feats_source, feats_target),
    )
    reports = tuple(
        proxy_a_distance(u, v, seed=seed, pair=name, **kwargs) for name, u, v in pairs
    )
    sb, bt, st = (r.value(metric) for r in reports)
    return bool(sb < st and bt < st), reports


def sliced_wasserstein(x, y, n_projections: int = 64, seed: int = 0) -> float:
    """Average 1-d Wasserstein-1 distance over random projection directions.

    Point clouds may differ in size; each projection compares matched
    quantiles. Deterministic for a given seed.
    """
    a = _check_features("sliced_wasserstein", x)
    b = _check_features("sliced_wasserstein", y)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"sliced_wasserstein: feature widths differ, {a.shape} vs {b.shape}"
        )
    if n_projections < 1:
        raise ConfigError(f"sliced_wasserstein: n_projections must be >= 1, got {n_projections}")
    rng = stream(seed, "sliced-wasserstein")
    dirs = rng.normal(size=(a.shape[1], n_projections))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=0, keepdims=True), 1e-12)
    pa = np.sort(a @ dirs, axis=0)
    pb = np.sort(b @ dirs, axis=0)
    if a.shape[0] != b.shape[0]:
        grid = (np.arange(max(a.shape[0], b.shape[0])) + 0.5) / max(a.shape[0], b.shape[0])
        qa = np.stack([np.quantile(pa[:, j], grid) for j in range(n_projections)], axis=1)
        qb = np.stack([np.quantile(pb[:, j], grid) for j in range(n_projections)], axis=1)
        return float(np.mean(np.abs(qa - qb)))
    return float(np.mean(np.abs(pa - pb)))
