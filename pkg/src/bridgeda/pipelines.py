"""End-to-end trainers: source-only baseline, bridged adaptation, two-hop translation.

The adaptation trainer (`train_pada`) runs six sub-steps per iteration:
task classification, pairwise domain-adversarial alignment, class-level
prototype matching, entropy-based disentanglement, mutual-information
reduction, and feature reconstruction. Every auxiliary step is skipped
outright when its weight is zero, so a run with all auxiliary weights at
zero is bit-identical to `train_source_only` under a matched seed.

All randomness flows through named streams keyed off the config seed:
"task", "adv", "proto", "ent", "mine", "rec", plus "probe" when the
diagnostic domain probe is enabled. Identical (data, config) pairs give
identical metric streams.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import tensor as T
from .errors import (
    ConfigError,
    ContractError,
    DataFormatError,
    EstimationError,
    LabelError,
    TrainingError,
    ValidationError,
)
from .losses import (
    EXP_CAP,
    CfganDiscriminators,
    CfganGenerators,
    cfgan_objective,
    clamp_count,
    class_level_discrepancy,
    cross_entropy,
    domain_identifier_loss,
    entropy_confusion_loss,
    mine_estimate,
    reconstruction_loss,
)
from .nn import Adam, Mlp, MlpSpec
from .prototypes import PrototypeSet, compute_prototypes, ema_update, pseudo_label
from .divergence import sliced_wasserstein
from .rng import stream
from .synthdata import DomainDataset
from .tensor import Tensor

LOSS_KEYS = ("ce", "di", "ent", "proto", "mi", "rec", "cycle", "gan_d", "gan_g", "sw")
DI_BRANCHES = ("f_di", "f_ci", "f_g")


def _positive_widths(name: str, widths) -> Tuple[int, ...]:
    out = tuple(int(w) for w in widths)
    if any(w <= 0 for w in out):
        raise ConfigError(f"{name} must be positive, got {out}")
    return out


@dataclass(frozen=True)
class PadaConfig:
    """Architecture widths, loss weights, and schedule for the trainers.

    Width tuples list layer sizes after the data-determined input width;
    classifier tuples are hidden-only (the class count comes from the
    labels). `lam` is reserved for the translation trainer and unused
    here. Warm-up counts delay an auxiliary step until that iteration.
    """

    g_widths: Tuple[int, ...] = (16, 16)
    d_widths: Tuple[int, ...] = (8,)
    c_widths: Tuple[int, ...] = ()
    di_widths: Tuple[int, ...] = (8,)
    r_widths: Tuple[int, ...] = (16,)
    t_widths: Tuple[int, ...] = (32,)
    alpha_adv: float = 1.0
    beta_proto: float = 0.5
    gamma_ent: float = 0.1
    delta_rec: float = 0.1
    eta_mi: float = 0.01
    lam: float = 0.0
    lr: float = 1e-3
    iterations: int = 1000
    batch_size: int = 64
    pseudo_threshold: float = 0.8
    proto_momentum: float = 0.7
    warmup_adv: int = 0
    warmup_proto: int = 0
    warmup_ent: int = 0
    warmup_mi: int = 0
    warmup_rec: int = 0
    di_branch: str = "f_di"
    eval_every: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("g_widths", "d_widths", "c_widths", "di_widths", "r_widths", "t_widths"):
            object.__setattr__(self, name, _positive_widths(name, getattr(self, name)))
        if not self.g_widths or not self.d_widths:
            raise ConfigError("g_widths and d_widths need at least one layer")
        for name in ("alpha_adv", "beta_proto", "gamma_ent", "delta_rec", "eta_mi", "lam"):
            if not getattr(self, name) >= 0.0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if not 0.0 < self.pseudo_threshold <= 1.0:
            raise ConfigError(f"pseudo_threshold must lie in (0, 1], got {self.pseudo_threshold}")
        if not 0.0 <= self.proto_momentum < 1.0:
            raise ConfigError(f"proto_momentum must lie in [0, 1), got {self.proto_momentum}")
        for name in ("warmup_adv", "warmup_proto", "warmup_ent", "warmup_mi", "warmup_rec"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.di_branch not in DI_BRANCHES:
            raise ConfigError(f"di_branch must be one of {DI_BRANCHES}, got {self.di_branch!r}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be non-negative, got {self.eval_every}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True)
class CfganConfig:
    """Settings for the two-hop translation trainer.

    Generators are residual maps x + mlp(x) with tanh hidden layers;
    `lam` weights the second-hop adversarial and distant-cycle terms,
    `cycle_weight` scales the whole cycle objective against the
    adversarial one.
    """

    g_widths: Tuple[int, ...] = (64, 64)
    d_widths: Tuple[int, ...] = (64,)
    lam: float = 1.0
    cycle_weight: float = 30.0
    lr: float = 1e-3
    beta1: float = 0.5
    iterations: int = 5000
    batch_size: int = 64
    log_every: int = 100
    sw_projections: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("g_widths", "d_widths"):
            object.__setattr__(self, name, _positive_widths(name, getattr(self, name)))
        if self.lam < 0.0:
            raise ConfigError(f"lam must be non-negative, got {self.lam}")
        if self.cycle_weight < 0.0:
            raise ConfigError(f"cycle_weight must be non-negative, got {self.cycle_weight}")
        if self.lr <= 0.0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.beta1 < 1.0:
            raise ConfigError(f"beta1 must lie in [0, 1), got {self.beta1}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.log_every < 0:
            raise ConfigError(f"log_every must be non-negative, got {self.log_every}")
        if self.sw_projections < 1:
            raise ConfigError(f"sw_projections must be positive, got {self.sw_projections}")
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")


# ---------------------------------------------------------------------------
# metric records


@dataclass(frozen=True)
class MetricRecord:
    """One training iteration's scalar observations.

    `losses` holds named scalars from LOSS_KEYS; steps that did not run
    simply have no entry. `accuracy` maps domain names (plus diagnostic
    series such as "di_probe") to fractions. Non-finite values are legal
    here; trainers abort right after appending such a flagged record.
    """

    iteration: int
    losses: Dict[str, float]
    accuracy: Dict[str, float] = field(default_factory=dict)
    wall_clock: float = 0.0
    flags: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.iteration < 0:
            raise ValidationError(f"MetricRecord: iteration must be non-negative, got {self.iteration}")
        bad = [k for k in self.losses if k not in LOSS_KEYS]
        if bad:
            raise ValidationError(f"MetricRecord: unknown loss keys {bad}; allowed: {LOSS_KEYS}")
        object.__setattr__(self, "losses", {k: float(v) for k, v in self.losses.items()})
        object.__setattr__(self, "accuracy", {str(k): float(v) for k, v in self.accuracy.items()})
        object.__setattr__(self, "flags", tuple(str(f) for f in self.flags))

    def to_dict(self, include_wall_clock: bool = False) -> Dict:
        out = {
            "iteration": self.iteration,
            "losses": dict(self.losses),
            "accuracy": dict(self.accuracy),
            "flags": list(self.flags),
        }
        if include_wall_clock:
            out["wall_clock"] = self.wall_clock
        return out

    def to_json(self, include_wall_clock: bool = False) -> str:
        return json.dumps(self.to_dict(include_wall_clock), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MetricRecord":
        try:
            return cls(
                iteration=int(d["iteration"]),
                losses=dict(d["losses"]),
                accuracy=dict(d.get("accuracy", {})),
                wall_clock=float(d.get("wall_clock", 0.0)),
                flags=tuple(d.get("flags", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"metric record: {exc}") from None


def write_metrics(path, records: Sequence[MetricRecord], include_wall_clock: bool = False) -> None:
    """Write records as one JSON object per line; iterations must strictly increase."""
    last = -1
    lines = []
    for rec in records:
        if rec.iteration <= last:
            raise ValidationError(
                f"write_metrics: iteration {rec.iteration} does not increase past {last}"
            )
        last = rec.iteration
        lines.append(rec.to_json(include_wall_clock))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def read_metrics(path) -> List[MetricRecord]:
    """Parse a metrics log line by line.

    A malformed final line (a truncated tail) is dropped; a malformed
    line anywhere else raises DataFormatError with its line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    records: List[MetricRecord] = []
    for lineno, line in enumerate(lines, start=1):
        try:
            records.append(MetricRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, DataFormatError) as exc:
            if lineno == len(lines):
                break
            raise DataFormatError(f"line {lineno}: {exc}") from None
    return records


# ---------------------------------------------------------------------------
# model bundle


@dataclass
class ModelBundle:
    """All networks of the adaptation model plus running prototypes.

    g: feature extractor; d_di / d_ci: disentangler heads for the
    domain-invariant and class-irrelevant branches; c: task classifier;
    ci: adversarial classifier for the entropy game; di_sb / di_bt:
    domain identifiers for the source-bridge and bridge-target pairs;
    r: feature reconstructor; t: mutual-information statistic network.
    """

    g: Mlp
    d_di: Mlp
    d_ci: Mlp
    c: Mlp
    ci: Mlp
    di_sb: Mlp
    di_bt: Mlp
    r: Mlp
    t: Mlp
    in_dim: int
    n_classes: int
    protos: Dict[str, PrototypeSet] = field(default_factory=dict)

    def components(self) -> Dict[str, Mlp]:
        return {
            "g": self.g, "d_di": self.d_di, "d_ci": self.d_ci, "c": self.c, "ci": self.ci,
            "di_sb": self.di_sb, "di_bt": self.di_bt, "r": self.r, "t": self.t,
        }

    def features(self, x) -> Tuple[Tensor, Tensor, Tensor]:
        """(trunk, domain-invariant, class-irrelevant) features for a batch."""
        f_g = self.g(x)
        return f_g, self.d_di(f_g), self.d_ci(f_g)

    def logits(self, x) -> Tensor:
        return self.c(self.d_di(self.g(x)))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x).data, axis=1)


def _component_seed(seed: int, name: str) -> int:
    return int(stream(seed, f"init-{name}").integers(0, 2**63 - 1))


def build_bundle(in_dim: int, n_classes: int, cfg: PadaConfig) -> ModelBundle:
    """Initialize every component from per-name streams off the config seed."""
    if in_dim < 1:
        raise ConfigError(f"build_bundle: in_dim must be positive, got {in_dim}")
    if n_classes < 2:
        raise ConfigError(f"build_bundle: need at least 2 classes, got {n_classes}")
    g_out = cfg.g_widths[-1]
    m = cfg.d_widths[-1]
    branch_w = g_out if cfg.di_branch == "f_g" else m
    specs = {
        "g": MlpSpec((in_dim, *cfg.g_widths)),
        "d_di": MlpSpec((g_out, *cfg.d_widths)),
        "d_ci": MlpSpec((g_out, *cfg.d_widths)),
        "c": MlpSpec((m, *cfg.c_widths, n_classes)),
        "ci": MlpSpec((m, *cfg.c_widths, n_classes)),
        "di_sb": MlpSpec((branch_w, *cfg.di_widths, 1), final_activation="sigmoid"),
        "di_bt": MlpSpec((branch_w, *cfg.di_widths, 1), final_activation="sigmoid"),
        "r": MlpSpec((2 * m, *cfg.r_widths, g_out)),
        "t": MlpSpec((2 * m, *cfg.t_widths, 1)),
    }
    nets = {name: Mlp.init(spec, _component_seed(cfg.seed, name)) for name, spec in specs.items()}
    return ModelBundle(in_dim=in_dim, n_classes=n_classes, **nets)


def evaluate(model: ModelBundle, data) -> Dict[str, float]:
    """Argmax accuracy of the classifier branch per labeled domain.

    Accepts a single DomainDataset or a mapping of name to dataset; every
    dataset must carry complete labels (the sealed copies qualify).
    """
    if isinstance(data, DomainDataset):
        data = {data.domain_tag: data}
    out: Dict[str, float] = {}
    for name, ds in data.items():
        labels = ds.require_labels()
        pred = model.predict(ds.features)
        if pred.shape[0] != labels.shape[0]:
            raise ContractError(
                f"evaluate: {pred.shape[0]} predictions vs {labels.shape[0]} labels for {name!r}"
            )
        out[name] = float(np.mean(pred == labels))
    return out


# ---------------------------------------------------------------------------
# adaptation training


def _zero_grads(*nets) -> None:
    for net in nets:
        for p in net.params:
            p.grad = None


def _branch_feats(bundle: ModelBundle, cfg: PadaConfig, x) -> Tensor:
    f_g = bundle.g(x)
    if cfg.di_branch == "f_g":
        return f_g
    head = bundle.d_di if cfg.di_branch == "f_di" else bundle.d_ci
    return head(f_g)


def _class_sets(feats: Tensor, labels: np.ndarray, n_classes: int) -> List[Tensor]:
    return [T.take_rows(feats, np.nonzero(labels == c)[0]) for c in range(n_classes)]


class _ProbeState:
    """Held-out accuracy of the live source/bridge domain identifier.

    Scores the model's own (S, B) identifier on rows it never trains on;
    purely diagnostic, it draws from its own stream and never touches the
    model's parameters. When the identifier is trained unopposed its
    held-out accuracy climbs; under an adversarial extractor it trails the
    moving features and hovers near chance.
    """

    def __init__(self, bundle: ModelBundle, cfg: PadaConfig, n_source: int, n_bridge: int):
        rng = stream(cfg.seed, "probe")
        self.hold_s = rng.choice(n_source, size=max(1, n_source // 4), replace=False)
        self.hold_b = rng.choice(n_bridge, size=max(1, n_bridge // 4), replace=False)

    def step(self, bundle: ModelBundle, cfg: PadaConfig, xs: np.ndarray, xb: np.ndarray) -> float:
        hs = _branch_feats(bundle, cfg, xs[self.hold_s]).data
        hb = _branch_feats(bundle, cfg, xb[self.hold_b]).data
        p = bundle.di_sb(Tensor(np.concatenate([hs, hb], axis=0))).data.ravel()
        y_hold = np.concatenate([np.zeros(self.hold_s.size), np.ones(self.hold_b.size)])
        return float(np.mean((p > 0.5) == y_hold))


def train_source_only(
    source: DomainDataset,
    config: PadaConfig,
    eval_data: Optional[Mapping[str, DomainDataset]] = None,
) -> Tuple[ModelBundle, List[MetricRecord]]:
    """Train the classification path alone on labeled source data."""
    cfg = replace(config, alpha_adv=0.0, beta_proto=0.0, gamma_ent=0.0, delta_rec=0.0, eta_mi=0.0)
    return _train(source, None, None, cfg, eval_data, probe=False)


def train_pada(
    source: DomainDataset,
    bridge: DomainDataset,
    target: DomainDataset,
    config: PadaConfig,
    eval_data: Optional[Mapping[str, DomainDataset]] = None,
    probe: bool = False,
) -> Tuple[ModelBundle, List[MetricRecord]]:
    """Bridged adaptation: labeled source, unlabeled bridge and target.

    The bridge and target views must carry no labels; training never
    sees them. `probe=True` scores the live source/bridge domain
    identifier on a fixed holdout each iteration (recorded under
    "di_probe") and keeps the pair identifiers training even when the
    adversarial weight is zero so the reading stays meaningful.
    """
    for ds, name in ((bridge, "bridge"), (target, "target")):
        if ds is None:
            raise ContractError(f"train_pada: {name} dataset is required")
        if ds.labels is not None:
            raise LabelError(f"train_pada: {name} view must be unlabeled; call .unlabeled()")
    return _train(source, bridge, target, config, eval_data, probe)


def _train(
    source: DomainDataset,
    bridge: Optional[DomainDataset],
    target: Optional[DomainDataset],
    cfg: PadaConfig,
    eval_data: Optional[Mapping[str, DomainDataset]],
    probe: bool,
) -> Tuple[ModelBundle, List[MetricRecord]]:
    labels = source.require_labels()
    xs = source.features
    n_src = xs.shape[0]
    n_classes = int(labels.max()) + 1
    bundle = build_bundle(xs.shape[1], n_classes, cfg)
    opts = {name: Adam(mlp.params, lr=cfg.lr) for name, mlp in bundle.components().items()}
    nets = list(bundle.components().values())

    has_aux_domains = bridge is not None and target is not None
    xb = bridge.features if bridge is not None else None
    xt = target.features if target is not None else None

    task_rng = stream(cfg.seed, "task")
    adv_rng = stream(cfg.seed, "adv")
    proto_rng = stream(cfg.seed, "proto")
    ent_rng = stream(cfg.seed, "ent")
    mine_rng = stream(cfg.seed, "mine")
    rec_rng = stream(cfg.seed, "rec")
    probe_state = _ProbeState(bundle, cfg, n_src, xb.shape[0]) if probe and xb is not None else None

    batch = cfg.batch_size
    per_epoch = max(1, math.ceil(n_src / batch))
    records: List[MetricRecord] = []
    perm = np.arange(n_src)
    pl_bridge = pl_target = None
    mine_ema: Optional[float] = None
    t0 = time.perf_counter()

    def run_adv(i: int) -> bool:
        return cfg.alpha_adv > 0.0 and has_aux_domains and i >= cfg.warmup_adv

    def run_proto(i: int) -> bool:
        return cfg.beta_proto > 0.0 and has_aux_domains and i >= cfg.warmup_proto

    for i in range(cfg.iterations):
        losses: Dict[str, float] = {}
        accuracy: Dict[str, float] = {}
        flags: List[str] = []
        clamps_before = clamp_count()

        def check(name: str, value: float) -> float:
            if not math.isfinite(value):
                raise TrainingError(f"non-finite {name} loss at iteration {i}")
            return value

        try:
            pos = i % per_epoch
            if pos == 0:
                perm = task_rng.permutation(n_src)
            if run_proto(i) and (pos == 0 or pl_bridge is None):
                pl_bridge, pl_target = _refresh_pseudo(bundle, cfg, xs, labels, xb, xt)

            # task step: classification on the invariant branch
            idx = perm[pos * batch: (pos + 1) * batch]
            logits = bundle.c(bundle.d_di(bundle.g(xs[idx])))
            ce = cross_entropy(logits, labels[idx])
            losses["ce"] = check("ce", float(ce.data))
            _zero_grads(*nets)
            T.backward(ce)
            for name in ("g", "d_di", "c"):
                opts[name].step()

            if run_adv(i) or (probe_state is not None and has_aux_domains):
                losses["di"] = check(
                    "di",
                    _adv_step(bundle, cfg, opts, nets, adv_rng, xs, xb, xt, fool=run_adv(i)),
                )

            if run_proto(i):
                value = _proto_step(
                    bundle, cfg, opts, nets, proto_rng, xs, labels, xb, xt, pl_bridge, pl_target
                )
                if value is None:
                    flags.append("proto-skipped")
                else:
                    losses["proto"] = check("proto", value)

            if cfg.gamma_ent > 0.0 and i >= cfg.warmup_ent:
                losses["ent"] = check("ent", _ent_step(bundle, cfg, opts, nets, ent_rng, xs, labels))

            if cfg.eta_mi > 0.0 and i >= cfg.warmup_mi:
                value, mine_ema = _mi_step(
                    bundle, cfg, opts, nets, mine_rng, mine_ema, xs, xb, xt
                )
                losses["mi"] = check("mi", value)

            if cfg.delta_rec > 0.0 and i >= cfg.warmup_rec:
                losses["rec"] = check("rec", _rec_step(bundle, cfg, opts, nets, rec_rng, xs, xb, xt))

            if probe_state is not None:
                accuracy["di_probe"] = probe_state.step(bundle, cfg, xs, xb)

            if eval_data and cfg.eval_every and ((i + 1) % cfg.eval_every == 0 or i == cfg.iterations - 1):
                accuracy.update(evaluate(bundle, eval_data))
        except TrainingError as exc:
            if not exc.records:
                if clamp_count() > clamps_before:
                    flags.append("clamped")
                records.append(MetricRecord(i, dict(losses), dict(accuracy),
                                            time.perf_counter() - t0, (*flags, "non-finite")))
                raise TrainingError(str(exc), records=records) from None
            raise

        if clamp_count() > clamps_before:
            flags.append("clamped")
        records.append(MetricRecord(i, dict(losses), dict(accuracy),
                                    time.perf_counter() - t0, tuple(flags)))
    return bundle, records


def _refresh_pseudo(bundle, cfg, xs, labels, xb, xt):
    """Epoch-boundary pass: pseudo-labels for bridge/target, prototype blend."""
    f_s = bundle.d_di(bundle.g(xs)).data
    fresh = compute_prototypes(f_s, labels, bundle.n_classes, "source")
    prev = bundle.protos.get("source")
    bundle.protos["source"] = fresh if prev is None else ema_update(prev, fresh, cfg.proto_momentum)

    out = []
    for x, tag in ((xb, "bridge"), (xt, "target")):
        f = bundle.d_di(bundle.g(x))
        probs = T.softmax(bundle.c(f), axis=1).data
        pl = pseudo_label(f.data, probs, cfg.pseudo_threshold)
        out.append(pl)
        if len(pl):
            fresh = compute_prototypes(f.data[pl.indices], pl.labels, bundle.n_classes, tag)
            prev = bundle.protos.get(tag)
            bundle.protos[tag] = (
                fresh if prev is None else ema_update(prev, fresh, cfg.proto_momentum)
            )
    return out[0], out[1]


def _adv_step(bundle, cfg, opts, nets, rng, xs, xb, xt, fool: bool = True) -> float:
    """Identifier training then sign-flipped extractor update on both pairs.

    With `fool` off only the identifiers train; probe runs use this to keep
    their held-out accuracy meaningful when the adversarial weight is zero.
    """
    batch = cfg.batch_size
    ids = rng.integers(0, xs.shape[0], batch)
    idb = rng.integers(0, xb.shape[0], batch)
    idt = rng.integers(0, xt.shape[0], batch)
    f_s = _branch_feats(bundle, cfg, xs[ids])
    f_b = _branch_feats(bundle, cfg, xb[idb])
    f_t = _branch_feats(bundle, cfg, xt[idt])
    y = np.concatenate([np.zeros(batch), np.ones(batch)])

    det_sb = Tensor(np.concatenate([f_s.data, f_b.data], axis=0))
    det_bt = Tensor(np.concatenate([f_b.data, f_t.data], axis=0))
    d_loss = (
        domain_identifier_loss(bundle.di_sb(det_sb), y)
        + domain_identifier_loss(bundle.di_bt(det_bt), y)
    )
    _zero_grads(*nets)
    T.backward(d_loss)
    opts["di_sb"].step()
    opts["di_bt"].step()

    if fool:
        live_sb = domain_identifier_loss(bundle.di_sb(T.concat([f_s, f_b], axis=0)), y)
        live_bt = domain_identifier_loss(bundle.di_bt(T.concat([f_b, f_t], axis=0)), y)
        flipped = T.multiply(live_sb + live_bt, Tensor(-cfg.alpha_adv))
        _zero_grads(*nets)
        T.backward(flipped)
        opts["g"].step()
    return float(d_loss.data) / 2.0


def _proto_step(bundle, cfg, opts, nets, rng, xs, labels, xb, xt, pl_b, pl_t) -> Optional[float]:
    """Class-level discrepancy over true source classes and pseudo-labeled others."""
    if pl_b is None or pl_t is None or len(pl_b) == 0 or len(pl_t) == 0:
        return None
    batch = cfg.batch_size
    ids = rng.choice(xs.shape[0], size=min(batch, xs.shape[0]), replace=False)
    take_b = rng.choice(len(pl_b), size=min(batch, len(pl_b)), replace=False)
    take_t = rng.choice(len(pl_t), size=min(batch, len(pl_t)), replace=False)

    f_s = bundle.d_di(bundle.g(xs[ids]))
    f_b = bundle.d_di(bundle.g(xb[pl_b.indices[take_b]]))
    f_t = bundle.d_di(bundle.g(xt[pl_t.indices[take_t]]))
    sets_s = _class_sets(f_s, labels[ids], bundle.n_classes)
    sets_b = _class_sets(f_b, pl_b.labels[take_b], bundle.n_classes)
    sets_t = _class_sets(f_t, pl_t.labels[take_t], bundle.n_classes)
    try:
        disc = class_level_discrepancy(sets_s, sets_b, sets_t)
    except EstimationError:
        return None
    _zero_grads(*nets)
    T.backward(T.multiply(disc, Tensor(cfg.beta_proto)))
    opts["g"].step()
    opts["d_di"].step()
    return float(disc.data)


def _ent_step(bundle, cfg, opts, nets, rng, xs, labels) -> float:
    """Train the adversarial classifier, then scrub class signal from f_ci."""
    batch = cfg.batch_size
    ids = rng.integers(0, xs.shape[0], batch)
    f_g = bundle.g(xs[ids])
    ci_loss = cross_entropy(bundle.ci(bundle.d_di(f_g).detach()), labels[ids])
    _zero_grads(*nets)
    T.backward(ci_loss)
    opts["ci"].step()

    probs = T.softmax(bundle.ci(bundle.d_ci(f_g)), axis=1)
    ent = entropy_confusion_loss(probs)
    _zero_grads(*nets)
    T.backward(T.multiply(ent, Tensor(cfg.gamma_ent)))
    opts["d_ci"].step()
    return float(ent.data)


def _mi_step(bundle, cfg, opts, nets, rng, ema, xs, xb, xt):
    """Tighten the statistic network's bound, then push the branches apart."""
    batch = cfg.batch_size
    parts = [xs[rng.integers(0, xs.shape[0], batch)]]
    for x in (xb, xt):
        if x is not None:
            parts.append(x[rng.integers(0, x.shape[0], batch)])
    x_all = np.concatenate(parts, axis=0)
    f_g = bundle.g(x_all)
    f_di = bundle.d_di(f_g)
    f_ci = bundle.d_ci(f_g)
    perm = rng.permutation(x_all.shape[0])

    det_di, det_ci = f_di.detach(), f_ci.detach()
    det_shuf = Tensor(f_ci.data[perm])
    t_joint = bundle.t(T.concat([det_di, det_ci], axis=1))
    t_marg = bundle.t(T.concat([det_di, det_shuf], axis=1))
    exp_marg = T.tmean(T.exp(T.clip(t_marg, -np.inf, EXP_CAP)))
    batch_mean = float(exp_marg.data)
    ema = batch_mean if ema is None else 0.99 * ema + 0.01 * batch_mean
    surrogate = T.tmean(t_joint) - T.multiply(exp_marg, Tensor(1.0 / ema))
    _zero_grads(*nets)
    T.backward(T.multiply(surrogate, Tensor(-1.0)))
    opts["t"].step()

    est = mine_estimate(f_di, f_ci, T.take_rows(f_ci, perm), bundle.t)
    _zero_grads(*nets)
    T.backward(T.multiply(est, Tensor(cfg.eta_mi)))
    opts["d_di"].step()
    opts["d_ci"].step()
    return float(est.data), ema


def _rec_step(bundle, cfg, opts, nets, rng, xs, xb, xt) -> float:
    """Rebuild trunk features from the two branches; regularizes the split."""
    batch = cfg.batch_size
    parts = [xs[rng.integers(0, xs.shape[0], batch)]]
    for x in (xb, xt):
        if x is not None:
            parts.append(x[rng.integers(0, x.shape[0], batch)])
    f_g = bundle.g(np.concatenate(parts, axis=0))
    loss = reconstruction_loss(bundle.d_di(f_g), bundle.d_ci(f_g), f_g.detach(), bundle.r)
    _zero_grads(*nets)
    T.backward(T.multiply(loss, Tensor(cfg.delta_rec)))
    opts["r"].step()
    opts["d_di"].step()
    opts["d_ci"].step()
    return float(loss.data)


# ---------------------------------------------------------------------------
# two-hop translation training


@dataclass
class Translator:
    """Residual map x + net(x); exact identity when the last layer is zero."""

    net: Mlp

    def __call__(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        return x + self.net(x)

    @property
    def params(self):
        return self.net.params


@dataclass
class CfganModel:
    """Trained translators and their judges for the two-hop chain."""

    generators: CfganGenerators
    discriminators: CfganDiscriminators
    dim: int

    def translate(self, x) -> np.ndarray:
        """Map source points through both hops to the target domain."""
        return self.generators.b2t(self.generators.s2b(Tensor(np.asarray(x, dtype=np.float64)))).data


def build_cfgan(dim: int, cfg: CfganConfig) -> CfganModel:
    if dim < 1:
        raise ConfigError(f"build_cfgan: dim must be positive, got {dim}")
    gen_spec = MlpSpec((dim, *cfg.g_widths, dim), activation="tanh")
    disc_spec = MlpSpec((dim, *cfg.d_widths, 1), final_activation="sigmoid")
    gens = CfganGenerators(
        **{name: Translator(Mlp.init(gen_spec, _component_seed(cfg.seed, name)))
           for name in ("s2b", "b2t", "t2b", "b2s")}
    )
    discs = CfganDiscriminators(
        **{name: Mlp.init(disc_spec, _component_seed(cfg.seed, name))
           for name in ("d_s", "d_b", "d_t")}
    )
    return CfganModel(gens, discs, dim)


def train_cfgan(
    data: Mapping[str, DomainDataset],
    config: CfganConfig,
    model: Optional[CfganModel] = None,
) -> Tuple[CfganModel, List[MetricRecord]]:
    """Alternating generator/discriminator updates on the chained objective.

    `data` maps "source", "bridge", "target" to point sets of equal
    width. Every `log_every` iterations the sliced 1-Wasserstein distance
    from the fully translated source to the target lands in the record
    under "sw". Pass `model` to resume or to start from a custom
    initialization; by default a fresh one is built from `config`.
    """
    for key in ("source", "bridge", "target"):
        if key not in data:
            raise ValidationError(f"train_cfgan: data is missing the {key!r} domain")
    xs = data["source"].features
    xb = data["bridge"].features
    xt = data["target"].features
    if not (xs.shape[1] == xb.shape[1] == xt.shape[1]):
        raise ValidationError("train_cfgan: domains must share feature width")
    cfg = config
    if model is None:
        model = build_cfgan(xs.shape[1], cfg)
    elif model.dim != xs.shape[1]:
        raise ValidationError(
            f"train_cfgan: model width {model.dim} does not match data width {xs.shape[1]}"
        )
    gens, discs = model.generators, model.discriminators
    gen_nets = {"s2b": gens.s2b, "b2t": gens.b2t, "t2b": gens.t2b, "b2s": gens.b2s}
    disc_nets = {"d_s": discs.d_s, "d_b": discs.d_b, "d_t": discs.d_t}
    opts = {
        name: Adam(net.params, lr=cfg.lr, beta1=cfg.beta1)
        for name, net in {**gen_nets, **disc_nets}.items()
    }
    all_nets = list(gen_nets.values()) + list(disc_nets.values())
    rng = stream(cfg.seed, "cfgan-batch")
    records: List[MetricRecord] = []
    t0 = time.perf_counter()

    for i in range(cfg.iterations):
        losses: Dict[str, float] = {}
        clamps_before = clamp_count()
        try:
            ids = rng.integers(0, xs.shape[0], cfg.batch_size)
            idb = rng.integers(0, xb.shape[0], cfg.batch_size)
            idt = rng.integers(0, xt.shape[0], cfg.batch_size)
            out = cfgan_objective(xs[ids], xb[idb], xt[idt], gens, discs, cfg.lam)

            g_total = out.g_adv + T.multiply(out.cycle, Tensor(cfg.cycle_weight))
            _zero_grads(*all_nets)
            T.backward(g_total)
            for name in gen_nets:
                opts[name].step()

            _zero_grads(*all_nets)
            T.backward(out.d_loss)
            for name in disc_nets:
                opts[name].step()

            losses["gan_d"] = float(out.d_loss.data)
            losses["gan_g"] = float(out.g_adv.data)
            losses["cycle"] = float(out.cycle.data)
            if cfg.log_every and ((i + 1) % cfg.log_every == 0 or i == cfg.iterations - 1):
                losses["sw"] = sliced_wasserstein(
                    model.translate(xs), xt, cfg.sw_projections, seed=cfg.seed
                )
            for name, value in losses.items():
                if not math.isfinite(value):
                    raise TrainingError(f"non-finite {name} loss at iteration {i}")
        except TrainingError as exc:
            if not exc.records:
                clamped = ("clamped",) if clamp_count() > clamps_before else ()
                records.append(MetricRecord(i, dict(losses), {}, time.perf_counter() - t0,
                                            (*clamped, "non-finite")))
                raise TrainingError(str(exc), records=records) from None
            raise
        flags = ("clamped",) if clamp_count() > clamps_before else ()
        records.append(MetricRecord(i, dict(losses), {}, time.perf_counter() - t0, flags))
    return model, records


# ---------------------------------------------------------------------------
# persistence


def _mlp_payload(mlp: Mlp) -> Dict:
    return {
        "layer_widths": list(mlp.spec.layer_widths),
        "activation": mlp.spec.activation,
        "final_activation": mlp.spec.final_activation,
        "leaky_slope": mlp.spec.leaky_slope,
        "params": [p.data.tolist() for p in mlp.params],
    }


def _mlp_from_payload(d: Mapping) -> Mlp:
    try:
        spec = MlpSpec(
            tuple(d["layer_widths"]), d["activation"], d["final_activation"], d["leaky_slope"]
        )
        params = [Tensor(np.asarray(p, dtype=np.float64)) for p in d["params"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"model payload: {exc}") from None
    if len(params) != 2 * spec.n_layers:
        raise ValidationError(
            f"model payload: {len(params)} parameter arrays for {spec.n_layers} layers"
        )
    for layer in range(spec.n_layers):
        w, b = params[2 * layer], params[2 * layer + 1]
        want = (spec.layer_widths[layer], spec.layer_widths[layer + 1])
        if w.shape != want or b.shape != (want[1],):
            raise ValidationError(f"model payload: layer {layer} shapes {w.shape}, {b.shape}")
    return Mlp(spec, params)


def save_model(model: Union[ModelBundle, CfganModel], path) -> None:
    """Serialize a trained model to a single JSON document."""
    if isinstance(model, ModelBundle):
        payload = {
            "kind": "classifier",
            "in_dim": model.in_dim,
            "n_classes": model.n_classes,
            "components": {name: _mlp_payload(m) for name, m in model.components().items()},
            "protos": {
                tag: {
                    "prototypes": ps.prototypes.tolist(),
                    "counts": ps.counts.tolist(),
                    "domain_tag": ps.domain_tag,
                }
                for tag, ps in sorted(model.protos.items())
            },
        }
    elif isinstance(model, CfganModel):
        gens, discs = model.generators, model.discriminators
        payload = {
            "kind": "translation",
            "dim": model.dim,
            "generators": {
                name: _mlp_payload(getattr(gens, name).net)
                for name in ("s2b", "b2t", "t2b", "b2s")
            },
            "discriminators": {
                name: _mlp_payload(getattr(discs, name)) for name in ("d_s", "d_b", "d_t")
            },
        }
    else:
        raise ContractError(f"save_model: unsupported model type {type(model).__name__}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(payload, sort_keys=True))
        fh.write("\n")


def load_model(path) -> Union[ModelBundle, CfganModel]:
    """Rebuild a model saved by save_model; the kind field picks the type."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"model file {path}: {exc}") from None
    kind = payload.get("kind")
    if kind == "classifier":
        try:
            nets = {
                name: _mlp_from_payload(d) for name, d in payload["components"].items()
            }
            protos = {
                tag: PrototypeSet(
                    np.asarray(d["prototypes"], dtype=np.float64),
                    np.asarray(d["counts"], dtype=np.int64),
                    d.get("domain_tag", tag),
                )
                for tag, d in payload.get("protos", {}).items()
            }
            return ModelBundle(
                in_dim=int(payload["in_dim"]),
                n_classes=int(payload["n_classes"]),
                protos=protos,
                **nets,
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"model file {path}: {exc}") from None
    if kind == "translation":
        try:
            gens = CfganGenerators(
                **{
                    name: Translator(_mlp_from_payload(payload["generators"][name]))
                    for name in ("s2b", "b2t", "t2b", "b2s")
                }
            )
            discs = CfganDiscriminators(
                **{
                    name: _mlp_from_payload(payload["discriminators"][name])
                    for name in ("d_s", "d_b", "d_t")
                }
            )
            return CfganModel(gens, discs, int(payload["dim"]))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"model file {path}: {exc}") from None
    raise ValidationError(f"model file {path}: unknown kind {kind!r}")
