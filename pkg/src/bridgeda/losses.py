"""Differentiable training objectives.

Everything here returns scalar Tensors built on the autodiff core, so a
single `backward` call yields gradients for whichever parameters a
training step owns. Probability clamping and exp-input clamping bump a
module-level counter that pipelines snapshot into their metric records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import tensor as T
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    EstimationError,
    LabelError,
)
from .nn import Adam, Mlp, MlpSpec
from .rng import stream
from .tensor import Tensor

PROB_FLOOR = 1e-12
EXP_CAP = 30.0

_clamp_events = 0


def clamp_count() -> int:
    """Number of values clamped since the last reset."""
    return _clamp_events


def reset_clamp_count() -> None:
    global _clamp_events
    _clamp_events = 0


def _clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    global _clamp_events
    _clamp_events += int(np.count_nonzero((x.data < lo) | (x.data > hi)))
    return T.clip(x, lo, hi)


def _as_prob_vector(name: str, p) -> Tensor:
    p = p if isinstance(p, Tensor) else Tensor(p)
    if p.ndim == 2 and p.shape[1] == 1:
        p = T.tsum(p, axis=1)
    if p.ndim != 1:
        raise DimensionError(f"{name}: expects a probability vector, got shape {p.shape}")
    return p


def _as_matrix(name: str, x) -> Tensor:
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim == 1:
        x = T.reshape(x, (-1, 1))
    if x.ndim != 2:
        raise DimensionError(f"{name}: expects a 2-d sample matrix, got {x.shape}")
    return x


# ---------------------------------------------------------------------------
# classification and domain objectives


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    logits = logits if isinstance(logits, Tensor) else Tensor(logits)
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy: logits must be (n, k), got {logits.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise DimensionError(
            f"cross_entropy: labels shape {labels.shape} does not match logits {logits.shape}"
        )
    if labels.size == 0:
        raise ContractError("cross_entropy: empty batch")
    n, k = logits.shape
    lab = labels.astype(np.int64)
    bad = np.nonzero((lab < 0) | (lab >= k))[0]
    if bad.size:
        raise LabelError(f"cross_entropy: label {labels[bad[0]]} at index {bad[0]} outside [0, {k})")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), lab] = 1.0
    picked = T.tsum(T.multiply(T.log_softmax(logits, axis=1), Tensor(onehot)))
    return T.multiply(picked, Tensor(-1.0 / n))


def domain_identifier_loss(predicted_prob, domain_labels) -> Tensor:
    """Binary cross-entropy of a domain discriminator's probabilities.

    `domain_labels` are 0/1 per sample; probabilities at exactly 0 or 1
    are clamped into [1e-12, 1 - 1e-12] (counted via clamp_count).
    """
    p = _as_prob_vector("domain_identifier_loss", predicted_prob)
    y = np.asarray(domain_labels, dtype=np.float64)
    if y.shape != p.shape:
        raise DimensionError(
            f"domain_identifier_loss: labels shape {y.shape} does not match probs {p.shape}"
        )
    if y.size == 0:
        raise ContractError("domain_identifier_loss: empty batch")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise LabelError("domain_identifier_loss: domain labels must be 0 or 1")
    p = _clamp(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    n = y.size
    pos = T.multiply(T.log(p), Tensor(y))
    neg = T.multiply(T.log(Tensor(1.0) - p), Tensor(1.0 - y))
    return T.multiply(T.tsum(pos + neg), Tensor(-1.0 / n))


def entropy_confusion_loss(class_probs) -> Tensor:
    """Negative mean Shannon entropy of prediction rows.

    Bounded in [-ln(k), 0]; minimizing pushes rows toward uniform, which
    is the adversarial objective of a feature branch that should carry no
    class information. Rows must already be probabilities (sum to one
    within 1e-6).
    """
    p = class_probs if isinstance(class_probs, Tensor) else Tensor(class_probs)
    if p.ndim == 1:
        p = T.reshape(p, (1, -1))
    if p.ndim != 2:
        raise DimensionError(f"entropy_confusion_loss: expects (n, k) rows, got {p.shape}")
    if np.any(p.data < 0.0):
        raise ContractError("entropy_confusion_loss: negative probability entry")
    sums = p.data.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        worst = int(np.argmax(np.abs(sums - 1.0)))
        raise ContractError(
            f"entropy_confusion_loss: row {worst} sums to {sums[worst]:.8f}, not 1 within 1e-6"
        )
    n = p.shape[0]
    safe = T.clip(p, 1e-300, np.inf)
    plogp = T.multiply(p, T.log(safe))
    return T.multiply(T.tsum(plogp), Tensor(1.0 / n))


# ---------------------------------------------------------------------------
# kernel two-sample machinery


@dataclass(frozen=True)
class KernelSpec:
    """A sum of Gaussian RBF kernels, one per bandwidth."""

    bandwidths: Tuple[float, ...]

    def __post_init__(self):
        bw = tuple(float(b) for b in self.bandwidths)
        object.__setattr__(self, "bandwidths", bw)
        if not bw:
            raise ConfigError("KernelSpec: needs at least one bandwidth")
        if any(not np.isfinite(b) or b <= 0 for b in bw):
            raise ConfigError(f"KernelSpec: bandwidths must be positive and finite, got {bw}")


def median_heuristic(x, y, scales: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)) -> KernelSpec:
    """Bandwidths at the pooled median pairwise distance times `scales`.

    Falls back to 1.0 when the pooled points are all identical.
    """
    xa = np.atleast_2d(np.asarray(x if not isinstance(x, Tensor) else x.data, dtype=np.float64))
    ya = np.atleast_2d(np.asarray(y if not isinstance(y, Tensor) else y.data, dtype=np.float64))
    pool = np.concatenate([xa, ya], axis=0)
    sq = np.sum(pool * pool, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pool @ pool.T
    iu = np.triu_indices(pool.shape[0], k=1)
    dists = np.sqrt(np.maximum(d2[iu], 0.0))
    med = float(np.median(dists)) if dists.size else 0.0
    if med <= 0.0:
        med = 1.0
    return KernelSpec(tuple(med * s for s in scales))


def _pairwise_sq_dists(a: Tensor, b: Tensor) -> Tensor:
    ra = T.tsum(T.multiply(a, a), axis=1, keepdims=True)
    rb = T.tsum(T.multiply(b, b), axis=1, keepdims=True)
    cross = T.matmul(a, T.transpose(b))
    return ra + T.transpose(rb) - 2.0 * cross


def _kernel_mean(a: Tensor, b: Tensor, kernel: KernelSpec) -> Tensor:
    d2 = _pairwise_sq_dists(a, b)
    total = None
    for bw in kernel.bandwidths:
        k = T.exp(T.multiply(d2, Tensor(-1.0 / (2.0 * bw * bw))))
        total = k if total is None else total + k
    return T.tmean(total)


def mmd_squared(x, y, kernel: Optional[KernelSpec] = None) -> Tensor:
    """Biased V-statistic estimate of squared maximum mean discrepancy.

    mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y), summed over the kernel's
    bandwidths. The two sets are ordered canonically before computing,
    so the result is exactly symmetric in its arguments.
    """
    a = _as_matrix("mmd_squared", x)
    b = _as_matrix("mmd_squared", y)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ContractError("mmd_squared: sample sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(
            f"mmd_squared: feature widths differ, {a.shape} vs {b.shape}"
        )
    if kernel is None:
        kernel = median_heuristic(a.data, b.data)
    if (a.shape, a.data.tobytes()) > (b.shape, b.data.tobytes()):
        a, b = b, a
    return _kernel_mean(a, a, kernel) + _kernel_mean(b, b, kernel) - 2.0 * _kernel_mean(a, b, kernel)


def complete_classes(*class_sets) -> List[int]:
    """Indices of classes populated in every provided per-class list."""
    k = len(class_sets[0])
    if any(len(cs) != k for cs in class_sets):
        raise DimensionError("complete_classes: per-class lists must have equal length")

    def has(samples) -> bool:
        if samples is None:
            return False
        data = samples.data if isinstance(samples, Tensor) else np.asarray(samples)
        return data.size > 0

    return [c for c in range(k) if all(has(cs[c]) for cs in class_sets)]


def class_level_discrepancy(sets_a, sets_b, sets_c, kernel: Optional[KernelSpec] = None) -> Tensor:
    """Mean pairwise mmd_squared between per-class sample sets of three domains.

    For each class populated in all three domains the three pairwise
    discrepancies are summed; the result averages over those classes.
    Classes empty in any domain are skipped (see complete_classes).
    Raises EstimationError when no class is usable.
    """
    usable = complete_classes(sets_a, sets_b, sets_c)
    if not usable:
        raise EstimationError("class_level_discrepancy: no class populated in all three domains")
    if kernel is None:
        pool = [
            np.atleast_2d(s.data if isinstance(s, Tensor) else np.asarray(s, dtype=np.float64))
            for cs in (sets_a, sets_b, sets_c)
            for s in (cs[c] for c in usable)
        ]
        stacked = np.concatenate(pool, axis=0)
        kernel = median_heuristic(stacked, stacked)
    total = None
    for c in usable:
        a, b, d = sets_a[c], sets_b[c], sets_c[c]
        term = (
            mmd_squared(a, b, kernel)
            + mmd_squared(a, d, kernel)
            + mmd_squared(b, d, kernel)
        )
        total = term if total is None else total + term
    return T.multiply(total, Tensor(1.0 / len(usable)))


# ---------------------------------------------------------------------------
# mutual information estimation


def mine_estimate(p, q, q_marginal, statistic: Mlp) -> Tensor:
    """Donsker-Varadhan lower bound on I(p; q) under a statistics network.

    mean T(p, q) - log(mean exp(T(p, q'))) where q' is a marginal
    resample aligned with p's rows. Inputs to exp are capped at 30
    (counted via clamp_count).
    """
    pm = _as_matrix("mine_estimate", p)
    qm = _as_matrix("mine_estimate", q)
    qs = _as_matrix("mine_estimate", q_marginal)
    if pm.shape[0] < 2:
        raise ContractError(f"mine_estimate: needs at least 2 samples, got {pm.shape[0]}")
    if not (pm.shape[0] == qm.shape[0] == qs.shape[0]):
        raise DimensionError(
            f"mine_estimate: row counts differ, {pm.shape[0]}, {qm.shape[0]}, {qs.shape[0]}"
        )
    t_joint = statistic(T.concat([pm, qm], axis=1))
    t_marg = statistic(T.concat([pm, qs], axis=1))
    mean_exp = T.tmean(T.exp(_clamp(t_marg, -np.inf, EXP_CAP)))
    return T.tmean(t_joint) - T.log(mean_exp)


class MineEstimator:
    """Trains a statistics network to tighten the Donsker-Varadhan bound.

    The gradient for the network replaces the log-denominator with an
    exponential moving average (rate 0.99) of mean exp(T) so minibatch
    updates are not biased by a noisy denominator; reported values always
    come from the plain estimator.
    """

    def __init__(
        self,
        p_dim: int,
        q_dim: int,
        hidden: Sequence[int] = (100,),
        lr: float = 1e-3,
        seed: int = 0,
        ema_rate: float = 0.99,
    ):
        spec = MlpSpec((p_dim + q_dim, *hidden, 1), activation="leaky_relu")
        self.network = Mlp.init(spec, seed)
        self.opt = Adam(self.network.params, lr=lr)
        self.ema_rate = float(ema_rate)
        self.ema: Optional[float] = None

    def estimate(self, p, q, q_marginal) -> float:
        return mine_estimate(p, q, q_marginal, self.network).item()

    def step(self, p, q, q_marginal) -> float:
        """One ascent step on the bound; returns the plain estimate."""
        pm = _as_matrix("MineEstimator.step", p).detach()
        qm = _as_matrix("MineEstimator.step", q).detach()
        qs = _as_matrix("MineEstimator.step", q_marginal).detach()
        t_joint = self.network(T.concat([pm, qm], axis=1))
        t_marg = self.network(T.concat([pm, qs], axis=1))
        exp_marg = T.exp(_clamp(t_marg, -np.inf, EXP_CAP))
        batch_mean = float(T.tmean(exp_marg).data)
        self.ema = batch_mean if self.ema is None else (
            self.ema_rate * self.ema + (1.0 - self.ema_rate) * batch_mean
        )
        # d/dtheta log(mean exp T) with the EMA standing in for the denominator
        surrogate = T.tmean(t_joint) - T.multiply(T.tmean(exp_marg), Tensor(1.0 / self.ema))
        self.opt.zero_grad()
        T.backward(T.multiply(surrogate, Tensor(-1.0)))
        self.opt.step()
        value = float(T.tmean(t_joint).data) - float(np.log(batch_mean))
        return value


def fit_mine(
    p_samples,
    q_samples,
    steps: int = 2000,
    seed: int = 0,
    hidden: Sequence[int] = (100,),
    lr: float = 1e-3,
    final_resamples: int = 32,
) -> float:
    """Train a fresh estimator on paired samples; return the trained estimate.

    The returned value averages the plain estimator over `final_resamples`
    fresh marginal shuffles of the trained network.
    """
    pm = np.asarray(p_samples, dtype=np.float64)
    qm = np.asarray(q_samples, dtype=np.float64)
    if pm.ndim == 1:
        pm = pm.reshape(-1, 1)
    if qm.ndim == 1:
        qm = qm.reshape(-1, 1)
    if pm.ndim != 2 or qm.ndim != 2:
        raise DimensionError(f"fit_mine: expects sample matrices, got {pm.shape} and {qm.shape}")
    if pm.shape[0] != qm.shape[0]:
        raise DimensionError(f"fit_mine: sample counts differ, {pm.shape[0]} vs {qm.shape[0]}")
    est = MineEstimator(pm.shape[1], qm.shape[1], hidden=hidden, lr=lr, seed=seed)
    rng = stream(seed, "mine-shuffle")
    for _ in range(steps):
        est.step(pm, qm, qm[rng.permutation(pm.shape[0])])
    values = [
        est.estimate(pm, qm, qm[rng.permutation(pm.shape[0])]) for _ in range(final_resamples)
    ]
    return float(np.mean(values))


# ---------------------------------------------------------------------------
# reconstruction, adversarial pairs, cycles


def reconstruction_loss(f_di: Tensor, f_ci: Tensor, original: Tensor, reconstructor: Mlp) -> Tensor:
    """Mean squared error of rebuilding `original` from both feature branches."""
    di = _as_matrix("reconstruction_loss", f_di)
    ci = _as_matrix("reconstruction_loss", f_ci)
    orig = _as_matrix("reconstruction_loss", original)
    if not (di.shape[0] == ci.shape[0] == orig.shape[0]):
        raise DimensionError(
            f"reconstruction_loss: row counts differ, {di.shape[0]}, {ci.shape[0]}, {orig.shape[0]}"
        )
    recon = reconstructor(T.concat([di, ci], axis=1))
    if recon.shape != orig.shape:
        raise DimensionError(
            f"reconstruction_loss: reconstructor output {recon.shape} vs original {orig.shape}"
        )
    diff = recon - orig
    return T.tmean(T.multiply(diff, diff))


def gan_pair_losses(d_real, d_fake) -> Tuple[Tensor, Tensor]:
    """Non-saturating GAN losses from discriminator probabilities.

    d_loss = -mean log D(real) - mean log(1 - D(fake));
    g_loss = -mean log D(fake). Probabilities clamp into
    [1e-12, 1 - 1e-12] first.
    """
    r = _clamp(_as_prob_vector("gan_pair_losses", d_real), PROB_FLOOR, 1.0 - PROB_FLOOR)
    f = _clamp(_as_prob_vector("gan_pair_losses", d_fake), PROB_FLOOR, 1.0 - PROB_FLOOR)
    if r.size == 0 or f.size == 0:
        raise ContractError("gan_pair_losses: empty batch")
    d_loss = T.multiply(T.tmean(T.log(r)), Tensor(-1.0)) + T.multiply(
        T.tmean(T.log(Tensor(1.0) - f)), Tensor(-1.0)
    )
    g_loss = T.multiply(T.tmean(T.log(f)), Tensor(-1.0))
    return d_loss, g_loss


def cycle_consistency(x, reconstruction) -> Tensor:
    """Mean per-sample L1 distance between a batch and its round trip.

    A 1-d input counts as a single sample; 2-d inputs average the
    per-row L1 norms.
    """
    a = x if isinstance(x, Tensor) else Tensor(x)
    b = reconstruction if isinstance(reconstruction, Tensor) else Tensor(reconstruction)
    if a.shape != b.shape:
        raise DimensionError(f"cycle_consistency: shapes differ, {a.shape} vs {b.shape}")
    diff = T.absolute(b - a)
    if a.ndim == 1:
        return T.tsum(diff)
    if a.ndim != 2:
        raise DimensionError(f"cycle_consistency: expects 1-d or 2-d batches, got {a.shape}")
    return T.tmean(T.tsum(diff, axis=1))


# ---------------------------------------------------------------------------
# chained two-hop translation objective


@dataclass
class CfganGenerators:
    """The four translators of the chain source -> bridge -> target and back."""

    s2b: Mlp
    b2t: Mlp
    t2b: Mlp
    b2s: Mlp


@dataclass
class CfganDiscriminators:
    d_s: Mlp
    d_b: Mlp
    d_t: Mlp


@dataclass
class CfganLosses:
    """Scalars for alternating updates plus the individual terms.

    `d_loss` sees only detached translations, so its backward touches
    discriminators alone; `g_adv` and `cycle` flow through the
    generators with discriminators acting as fixed judges.
    """

    d_loss: Tensor
    g_adv: Tensor
    cycle: Tensor
    parts: Dict[str, Tensor]


def cfgan_objective(
    batch_s,
    batch_b,
    batch_t,
    generators: CfganGenerators,
    discriminators: CfganDiscriminators,
    lam: float,
) -> CfganLosses:
    """Assemble the two-hop adversarial and cycle objectives.

    Forward chain: s2b fakes are judged in the bridge domain, their
    second hop b2t(s2b(x)) is judged in the target domain with weight
    `lam`. The reverse chain mirrors it: t2b fakes judged in the bridge
    domain, b2s(t2b(z)) judged in the source domain with weight `lam`.
    The cycle term adds the two bridge-hop round trips unweighted and
    the two distant round trips weighted by `lam`. With lam = 0 every
    gradient into the second-hop networks (b2t and d_t) is exactly zero.
    """
    if lam < 0:
        raise ContractError(f"cfgan_objective: lam must be non-negative, got {lam}")
    xs = _as_matrix("cfgan_objective", batch_s)
    yb = _as_matrix("cfgan_objective", batch_b)
    zt = _as_matrix("cfgan_objective", batch_t)

    fake_b_fwd = generators.s2b(xs)
    fake_t_fwd = generators.b2t(fake_b_fwd)
    fake_b_rev = generators.t2b(zt)
    fake_s_rev = generators.b2s(fake_b_rev)

    real_b = discriminators.d_b(yb)
    real_t = discriminators.d_t(zt)
    real_s = discriminators.d_s(xs)

    def game(real_out, d_mlp, fake):
        d_l, _ = gan_pair_losses(real_out, d_mlp(fake.detach()))
        _, g_l = gan_pair_losses(real_out, d_mlp(fake))
        return d_l, g_l

    d_bf, g_bf = game(real_b, discriminators.d_b, fake_b_fwd)
    d_tf, g_tf = game(real_t, discriminators.d_t, fake_t_fwd)
    d_br, g_br = game(real_b, discriminators.d_b, fake_b_rev)
    d_sr, g_sr = game(real_s, discriminators.d_s, fake_s_rev)

    c_bridge = cycle_consistency(yb, generators.s2b(generators.b2s(yb)))
    c_source = cycle_consistency(xs, generators.b2s(fake_b_fwd))
    c_target = cycle_consistency(zt, generators.b2t(fake_b_rev))
    c_flow = cycle_consistency(fake_b_fwd, generators.t2b(fake_t_fwd))

    w = Tensor(float(lam))
    d_loss = d_bf + T.multiply(w, d_tf) + d_br + T.multiply(w, d_sr)
    g_adv = g_bf + T.multiply(w, g_tf) + g_br + T.multiply(w, g_sr)
    cycle = c_bridge + c_source + T.multiply(w, c_target) + T.multiply(w, c_flow)

    parts = {
        "d_bridge_forward": d_bf,
        "d_target_forward": d_tf,
        "d_bridge_reverse": d_br,
        "d_source_reverse": d_sr,
        "g_bridge_forward": g_bf,
        "g_target_forward": g_tf,
        "g_bridge_reverse": g_br,
        "g_source_reverse": g_sr,
        "cycle_bridge": c_bridge,
        "cycle_source": c_source,
        "cycle_target": c_target,
        "cycle_flow": c_flow,
    }
    return CfganLosses(d_loss, g_adv, cycle, parts)
