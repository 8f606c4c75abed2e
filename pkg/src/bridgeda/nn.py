"""Multilayer perceptrons and the Adam optimizer on the scratch tensor core.

Forward passes are stateless pure functions of (spec, params, input);
there is no dropout or normalization at this scale. Initialization is a
pure function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from . import tensor as T
from .errors import ConfigError, ContractError, DimensionError, TrainingError
from .rng import stream
from .tensor import Tensor

_HIDDEN_ACTS = ("relu", "leaky_relu", "tanh", "identity")
_FINAL_ACTS = ("identity", "softmax", "sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    """Architecture of a fully connected network.

    `layer_widths` runs from input width to output width; each adjacent
    pair is one affine layer. The hidden activation applies to every
    layer but the last, the final activation to the last only.
    """

    layer_widths: Tuple[int, ...]
    activation: str = "leaky_relu"
    final_activation: str = "identity"
    leaky_slope: float = 0.2

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ConfigError(f"layer_widths needs at least two entries, got {widths}")
        if any(w <= 0 for w in widths):
            raise ConfigError(f"layer_widths must be positive, got {widths}")
        if self.activation not in _HIDDEN_ACTS:
            raise ConfigError(f"activation must be one of {_HIDDEN_ACTS}, got {self.activation!r}")
        if self.final_activation not in _FINAL_ACTS:
            raise ConfigError(
                f"final_activation must be one of {_FINAL_ACTS}, got {self.final_activation!r}"
            )
        if not 0.0 < self.leaky_slope < 1.0:
            raise ConfigError(f"leaky_slope must lie in (0, 1), got {self.leaky_slope}")

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def in_width(self) -> int:
        return self.layer_widths[0]

    @property
    def out_width(self) -> int:
        return self.layer_widths[-1]


def init_mlp(spec: MlpSpec, seed: int) -> List[Tensor]:
    """Initialize parameters [W0, b0, W1, b1, ...] for `spec`.

    Weights are He-uniform for relu-family activations and
    Xavier-uniform otherwise; biases start at zero. Identical
    (spec, seed) pairs give bit-identical parameters.
    """
    rng = stream(seed, f"init-mlp-{spec.layer_widths}-{spec.activation}")
    he = spec.activation in ("relu", "leaky_relu")
    params: List[Tensor] = []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        limit = np.sqrt(6.0 / fan_in) if he else np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        params.append(Tensor(w))
        params.append(Tensor(np.zeros(fan_out)))
    return params


def _activate(name: str, x: Tensor, slope: float) -> Tensor:
    if name == "relu":
        return T.relu(x)
    if name == "leaky_relu":
        return T.leaky_relu(x, slope)
    if name == "tanh":
        return T.tanh(x)
    return x


def mlp_forward(spec: MlpSpec, params: Sequence[Tensor], x) -> Tensor:
    """Apply the network to a batch laid out as rows.

    Accepts a Tensor or array of shape (n, in_width); returns (n, out_width).
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.ndim != 2:
        raise DimensionError(f"mlp_forward: expects a 2-d batch, got shape {x.shape}")
    if x.shape[1] != spec.in_width:
        raise DimensionError(
            f"mlp_forward: input width {x.shape[1]} does not match spec width {spec.in_width}"
        )
    if len(params) != 2 * spec.n_layers:
        raise ContractError(
            f"mlp_forward: expected {2 * spec.n_layers} parameter tensors, got {len(params)}"
        )
    h = x
    for i in range(spec.n_layers):
        w, b = params[2 * i], params[2 * i + 1]
        h = T.matmul(h, w) + b
        last = i == spec.n_layers - 1
        if not last:
            h = _activate(spec.activation, h, spec.leaky_slope)
    if spec.final_activation == "softmax":
        h = T.softmax(h, axis=1)
    elif spec.final_activation == "sigmoid":
        h = T.sigmoid(h)
    return h


@dataclass
class Mlp:
    """A spec bound to its parameters; callable on a batch."""

    spec: MlpSpec
    params: List[Tensor]

    @classmethod
    def init(cls, spec: MlpSpec, seed: int) -> "Mlp":
        return cls(spec, init_mlp(spec, seed))

    def __call__(self, x) -> Tensor:
        return mlp_forward(self.spec, self.params, x)

    def param_arrays(self) -> List[np.ndarray]:
        return [p.data.copy() for p in self.params]


# ---------------------------------------------------------------------------
# Adam


@dataclass(frozen=True)
class AdamState:
    """Optimizer state; treated as immutable, adam_step returns a new one."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    step_count: int
    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]


def init_adam(
    params: Sequence[Tensor],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    if lr <= 0:
        raise ConfigError(f"lr must be positive, got {lr}")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ConfigError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
    zeros_m = tuple(np.zeros_like(p.data) for p in params)
    zeros_v = tuple(np.zeros_like(p.data) for p in params)
    return AdamState(lr, beta1, beta2, eps, 0, zeros_m, zeros_v)


def adam_step(
    params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState
) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update; pure in all arguments.

    Raises TrainingError on a non-finite gradient, carrying the step index.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError(
            f"adam_step: got {len(params)} params, {len(grads)} grads, state of {len(state.m)}"
        )
    t = state.step_count + 1
    new_params: List[np.ndarray] = []
    new_m: List[np.ndarray] = []
    new_v: List[np.ndarray] = []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient at optimizer step {t}")
        m_t = state.beta1 * m + (1.0 - state.beta1) * g
        v_t = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m_t / (1.0 - state.beta1**t)
        v_hat = v_t / (1.0 - state.beta2**t)
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m_t)
        new_v.append(v_t)
    return new_params, replace(state, step_count=t, m=tuple(new_m), v=tuple(new_v))


class Adam:
    """Stateful convenience wrapper tying an AdamState to live tensors."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = init_adam(self.params, lr, beta1, beta2, eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        """Apply one update from the tensors' current grads (missing grads count as zero)."""
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        new_data, self.state = adam_step([p.data for p in self.params], grads, self.state)
        for p, d in zip(self.params, new_data):
            p.data = d
