"""Stacked LSTM with an affine output layer, forward and backward passes in numpy.

Gate order inside every weight matrix is input, forget, cell, output. Layer l
has ``W[l]`` of shape (4H, D_l + H) acting on ``[x_t, h_{t-1}]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from config.defaults import POLICY_DEFAULTS
from datakit.dataset import NormStats


class PolicyFault(ValueError):
    """Malformed input reached the network (wrong shape or non-finite values)."""


@dataclass(frozen=True)
class PolicyConfig:
    input_dim: int
    output_dim: int
    num_lstm_layers: int = POLICY_DEFAULTS["num_lstm_layers"]
    hidden_units: int = POLICY_DEFAULTS["hidden_units"]
    window: int = POLICY_DEFAULTS["window"]
    batch_size: int = POLICY_DEFAULTS["batch_size"]

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.num_lstm_layers, self.hidden_units, self.batch_size) <= 0:
            raise ValueError("policy dimensions must be positive")
        if self.window < 2:
            raise ValueError("truncated-BPTT window must be at least 2")

    def layer_input_dim(self, layer: int) -> int:
        return self.input_dim if layer == 0 else self.hidden_units


@dataclass
class PolicyParams:
    config: PolicyConfig
    W: list[np.ndarray]
    b: list[np.ndarray]
    Wy: np.ndarray
    by: np.ndarray
    norm: NormStats | None = None
    meta: dict = field(default_factory=dict)

    def tensors(self) -> dict[str, np.ndarray]:
        named = {}
        for layer, (weight, bias) in enumerate(zip(self.W, self.b)):
            named[f"lstm{layer}.W"] = weight
            named[f"lstm{layer}.b"] = bias
        named["out.W"] = self.Wy
        named["out.b"] = self.by
        return named

    @classmethod
    def from_tensors(cls, config: PolicyConfig, tensors: dict[str, np.ndarray], norm=None, meta=None) -> "PolicyParams":
        layers = range(config.num_lstm_layers)
        params = cls(
            config,
            [tensors[f"lstm{layer}.W"] for layer in layers],
            [tensors[f"lstm{layer}.b"] for layer in layers],
            tensors["out.W"],
            tensors["out.b"],
            norm,
            dict(meta or {}),
        )
        params.check_shapes()
        return params

    def copy(self) -> "PolicyParams":
        return PolicyParams.from_tensors(self.config, {k: v.copy() for k, v in self.tensors().items()}, self.norm, self.meta)

    def check_shapes(self):
        cfg, hidden = self.config, self.config.hidden_units
        for layer in range(cfg.num_lstm_layers):
            if self.W[layer].shape != (4 * hidden, cfg.layer_input_dim(layer) + hidden) or self.b[layer].shape != (4 * hidden,):
                raise ValueError(f"LSTM layer {layer} tensors do not match the policy config")
        if self.Wy.shape != (cfg.output_dim, hidden) or self.by.shape != (cfg.output_dim,):
            raise ValueError("output layer tensors do not match the policy config")

    def is_finite(self) -> bool:
        return all(np.isfinite(value).all() for value in self.tensors().values())


def init_params(config: PolicyConfig, seed: int, norm: NormStats | None = None) -> PolicyParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases except +1 on the forget gate."""
    rng = np.random.default_rng(seed)
    hidden = config.hidden_units
    W, b = [], []
    for layer in range(config.num_lstm_layers):
        fan_in = config.layer_input_dim(layer) + hidden
        bound = 1.0 / np.sqrt(fan_in)
        W.append(rng.uniform(-bound, bound, (4 * hidden, fan_in)))
        bias = np.zeros(4 * hidden)
        bias[hidden : 2 * hidden] = 1.0
        b.append(bias)
    bound = 1.0 / np.sqrt(hidden)
    Wy = rng.uniform(-bound, bound, (config.output_dim, hidden))
    return PolicyParams(config, W, b, Wy, np.zeros(config.output_dim), norm)


def zero_params(config: PolicyConfig, norm: NormStats | None = None) -> PolicyParams:
    hidden = config.hidden_units
    return PolicyParams(
        config,
        [np.zeros((4 * hidden, config.layer_input_dim(layer) + hidden)) for layer in range(config.num_lstm_layers)],
        [np.zeros(4 * hidden) for _ in range(config.num_lstm_layers)],
        np.zeros((config.output_dim, hidden)),
        np.zeros(config.output_dim),
        norm,
    )


@dataclass
class LSTMState:
    h: list[np.ndarray]
    c: list[np.ndarray]

    @classmethod
    def zeros(cls, config: PolicyConfig, batch: int = 1) -> "LSTMState":
        shape = (batch, config.hidden_units)
        return cls([np.zeros(shape) for _ in range(config.num_lstm_layers)], [np.zeros(shape) for _ in range(config.num_lstm_layers)])

    def detach(self) -> "LSTMState":
        return LSTMState([h.copy() for h in self.h], [c.copy() for c in self.c])


@dataclass
class LayerCache:
    xh: np.ndarray
    c_prev: np.ndarray
    gates: np.ndarray
    tanh_c: np.ndarray


@dataclass
class ForwardCache:
    layers: list[LayerCache]
    top: np.ndarray


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(inputs: np.ndarray, config: PolicyConfig) -> tuple[np.ndarray, bool]:
    inputs = np.asarray(inputs, dtype=float)
    single = inputs.ndim == 2
    batch = inputs[None] if single else inputs
    if batch.ndim != 3 or batch.shape[2] != config.input_dim:
        raise PolicyFault(f"expected inputs with last dimension {config.input_dim}, got shape {inputs.shape}")
    return batch, single


def forward(params: PolicyParams, inputs: np.ndarray, state: LSTMState | None = None, keep_cache: bool = False):
    """Run the stack over (T, D) or (B, T, D) inputs.

    Returns (outputs, final state, cache); the cache is None unless requested.
    """
    cfg = params.config
    batch, single = _as_batch(inputs, cfg)
    n_batch, steps, _ = batch.shape
    hidden = cfg.hidden_units
    state = state if state is not None else LSTMState.zeros(cfg, n_batch)
    final = LSTMState([], [])
    caches = []
    layer_in = batch
    for layer in range(cfg.num_lstm_layers):
        W, b = params.W[layer], params.b[layer]
        h, c = state.h[layer], state.c[layer]
        d_in = layer_in.shape[2]
        xh = np.empty((n_batch, steps, d_in + hidden))
        c_prev = np.empty((n_batch, steps, hidden))
        gates = np.empty((n_batch, steps, 4 * hidden))
        tanh_c = np.empty((n_batch, steps, hidden))
        out = np.empty((n_batch, steps, hidden))
        for t in range(steps):
            xh[:, t, :d_in] = layer_in[:, t]
            xh[:, t, d_in:] = h
            z = xh[:, t] @ W.T + b
            i = _sigmoid(z[:, :hidden])
            f = _sigmoid(z[:, hidden : 2 * hidden])
            g = np.tanh(z[:, 2 * hidden : 3 * hidden])
            o = _sigmoid(z[:, 3 * hidden :])
            c_prev[:, t] = c
            c = f * c + i * g
            tc = np.tanh(c)
            h = o * tc
            gates[:, t] = np.concatenate([i, f, g, o], axis=1)
            tanh_c[:, t] = tc
            out[:, t] = h
        final.h.append(h)
        final.c.append(c)
        if keep_cache:
            caches.append(LayerCache(xh, c_prev, gates, tanh_c))
        layer_in = out
    outputs = layer_in @ params.Wy.T + params.by
    cache = ForwardCache(caches, layer_in) if keep_cache else None
    return (outputs[0] if single else outputs), final, cache


def loss(outputs: np.ndarray, targets: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Mean squared error over every unmasked step and output dimension."""
    if outputs.shape != targets.shape:
        raise ValueError(f"outputs {outputs.shape} and targets {targets.shape} differ in shape")
    err = (outputs - targets) ** 2
    if mask is None:
        return float(err.mean())
    weight = mask[..., None] * np.ones(outputs.shape[-1])
    total = weight.sum()
    return float((err * weight).sum() / total) if total > 0 else 0.0


def loss_gradient(outputs: np.ndarray, targets: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    if mask is None:
        return 2.0 * (outputs - targets) / outputs.size
    weight = mask[..., None] * np.ones(outputs.shape[-1])
    total = weight.sum()
    return 2.0 * (outputs - targets) * weight / total if total > 0 else np.zeros_like(outputs)


def backward(params: PolicyParams, cache: ForwardCache, d_outputs: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients through time for one forward window (no gradient enters from later windows)."""
    cfg = params.config
    hidden = cfg.hidden_units
    d_outputs = d_outputs[None] if d_outputs.ndim == 2 else d_outputs
    top = cache.top
    grads = {
        "out.W": np.einsum("bto,bth->oh", d_outputs, top),
        "out.b": d_outputs.sum(axis=(0, 1)),
    }
    d_h_seq = d_outputs @ params.Wy
    n_batch, steps, _ = d_h_seq.shape
    for layer in reversed(range(cfg.num_lstm_layers)):
        W = params.W[layer]
        lc = cache.layers[layer]
        d_in = lc.xh.shape[2] - hidden
        dW = np.zeros_like(W)
        db = np.zeros(4 * hidden)
        d_x = np.empty((n_batch, steps, d_in))
        dh_next = np.zeros((n_batch, hidden))
        dc_next = np.zeros((n_batch, hidden))
        for t in reversed(range(steps)):
            i = lc.gates[:, t, :hidden]
            f = lc.gates[:, t, hidden : 2 * hidden]
            g = lc.gates[:, t, 2 * hidden : 3 * hidden]
            o = lc.gates[:, t, 3 * hidden :]
            tc = lc.tanh_c[:, t]
            dh = d_h_seq[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc**2)
            dz = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * lc.c_prev[:, t] * f * (1.0 - f),
                    dc * i * (1.0 - g**2),
                    dh * tc * o * (1.0 - o),
                ],
                axis=1,
            )
            dW += dz.T @ lc.xh[:, t]
            db += dz.sum(axis=0)
            dxh = dz @ W
            d_x[:, t] = dxh[:, :d_in]
            dh_next = dxh[:, d_in:]
            dc_next = dc * f
        grads[f"lstm{layer}.W"] = dW
        grads[f"lstm{layer}.b"] = db
        d_h_seq = d_x
    return grads


def predict_step(params: PolicyParams, hidden: LSTMState | None, input_vector: np.ndarray) -> tuple[np.ndarray, LSTMState]:
    """One stateful step on a normalised input vector; the caller denormalises."""
    x = np.asarray(input_vector, dtype=float)
    if x.shape != (params.config.input_dim,):
        raise PolicyFault(f"expected input of shape ({params.config.input_dim},), got {x.shape}")
    if not np.isfinite(x).all():
        raise PolicyFault("non-finite policy input")
    outputs, state, _ = forward(params, x[None, None, :], hidden)
    return outputs[0, 0], state
