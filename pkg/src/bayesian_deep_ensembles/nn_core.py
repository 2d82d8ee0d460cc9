"""Small dense-network engine: parameters, forward/backward passes and Adam.

Batches are row-major: an input batch has shape ``(n, in_dim)`` and a layer
computes ``act(x @ W.T + b)`` with ``W`` of shape ``(out_dim, in_dim)``.
Everything is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, ShapeError

ACTIVATIONS = ("relu", "identity")
PARAMS_FORMAT = "bde-mlp-params/1"


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray
    bias: np.ndarray | None
    activation: str = "identity"

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class MlpParams:
    """Ordered chain of dense layers."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("a network needs at least one layer")
        for k, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layer {k}: unknown activation {layer.activation!r}")
            if layer.weight.ndim != 2:
                raise ShapeError(f"layer {k}: weight must be 2-D")
            if layer.bias is not None and layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"layer {k}: bias shape {layer.bias.shape} != ({layer.out_dim},)")
            if k > 0 and layer.in_dim != self.layers[k - 1].out_dim:
                raise ShapeError(
                    f"layer {k} expects {layer.in_dim} inputs but layer {k - 1} "
                    f"emits {self.layers[k - 1].out_dim}"
                )

    @property
    def layer_dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def activations(self) -> list[str]:
        return [layer.activation for layer in self.layers]

    def arrays(self) -> list[np.ndarray]:
        """Weights and (present) biases in a fixed order."""
        out = []
        for layer in self.layers:
            out.append(layer.weight)
            if layer.bias is not None:
                out.append(layer.bias)
        return out

    def with_arrays(self, arrays) -> MlpParams:
        """Rebuild a chain of identical layout from ``arrays()``-ordered values."""
        it = iter(arrays)
        layers = []
        for layer in self.layers:
            w = np.asarray(next(it), dtype=np.float64)
            b = None if layer.bias is None else np.asarray(next(it), dtype=np.float64)
            if w.shape != layer.weight.shape:
                raise ShapeError(f"weight shape {w.shape} != {layer.weight.shape}")
            layers.append(Layer(w, b, layer.activation))
        return MlpParams(tuple(layers))

    @property
    def num_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def sq_norm(self) -> float:
        return float(sum(np.sum(a * a) for a in self.arrays()))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_flat(self, vec: np.ndarray) -> MlpParams:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.num_params,):
            raise ShapeError(f"flat vector has shape {vec.shape}, expected ({self.num_params},)")
        arrays, i = [], 0
        for a in self.arrays():
            arrays.append(vec[i : i + a.size].reshape(a.shape))
            i += a.size
        return self.with_arrays(arrays)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


@dataclass(frozen=True)
class InitConfig:
    scheme: str = "glorot_uniform"
    hidden_activation: str = "relu"
    output_activation: str = "identity"
    output_bias: bool = False


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    pre: list[np.ndarray]
    post: list[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_mlp(layer_dims, config: InitConfig | None = None, seed: int = 0) -> MlpParams:
    """Draw a fresh chain of dense layers.

    Weights come from the configured uniform scheme; biases start at zero. The
    output layer uses ``config.output_activation`` (identity by default) and
    carries no bias unless ``config.output_bias`` is set.
    """
    config = config or InitConfig()
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ConfigError(f"invalid layer dims {list(layer_dims)}")
    for act in (config.hidden_activation, config.output_activation):
        if act not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {act!r}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1417]))
    layers = []
    n_layers = len(dims) - 1
    for k in range(n_layers):
        fan_in, fan_out = dims[k], dims[k + 1]
        if config.scheme == "he_uniform":
            bound = np.sqrt(6.0 / fan_in)
        elif config.scheme == "glorot_uniform":
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        else:
            raise ConfigError(f"unknown init scheme {config.scheme!r}")
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        last = k == n_layers - 1
        bias = None if (last and not config.output_bias) else np.zeros(fan_out)
        act = config.output_activation if last else config.hidden_activation
        layers.append(Layer(w, bias, act))
    return MlpParams(tuple(layers))


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return z


def forward(params: MlpParams, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layers[0].in_dim:
        raise ShapeError(f"input shape {x.shape} incompatible with input dim {params.layers[0].in_dim}")
    pre, post = [], []
    h = x
    for layer in params.layers:
        z = h @ layer.weight.T
        if layer.bias is not None:
            z = z + layer.bias
        h = _activate(z, layer.activation)
        pre.append(z)
        post.append(h)
    return ForwardTrace(x, pre, post)


def backward(trace: ForwardTrace, params: MlpParams, output_grad, return_input_grad: bool = False):
    """Reverse-mode gradient of a scalar objective given d(objective)/d(output).

    Returns an ``MlpParams`` holding the gradients, and also the gradient with
    respect to the inputs when ``return_input_grad`` is set.
    """
    g = np.asarray(output_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if len(trace.pre) != len(params.layers):
        raise ShapeError("trace was not produced by these parameters")
    if g.shape != trace.output.shape:
        raise ShapeError(f"output_grad shape {g.shape} != output shape {trace.output.shape}")
    grads: list[np.ndarray] = []
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if layer.activation == "relu":
            g = g * (trace.pre[k] > 0)
        h_in = trace.inputs if k == 0 else trace.post[k - 1]
        gw = g.T @ h_in
        if layer.bias is not None:
            grads.append(g.sum(axis=0))
        grads.append(gw)
        if k > 0 or return_input_grad:
            g = g @ layer.weight
    grad_params = params.with_arrays(grads[::-1])
    if return_input_grad:
        return grad_params, g
    return grad_params


def adam_init(params: MlpParams, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(a) for a in params.arrays()],
        v=[np.zeros_like(a) for a in params.arrays()],
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    g_arrays = grads.arrays()
    p_arrays = params.arrays()
    if len(g_arrays) != len(p_arrays) or any(g.shape != p.shape for g, p in zip(g_arrays, p_arrays)):
        raise ShapeError("gradient layout does not match parameters")
    if not all(np.all(np.isfinite(g)) for g in g_arrays):
        raise NumericError("non-finite gradient entries")
    b1, b2 = state.beta1, state.beta2
    t = state.step + 1
    m = [b1 * m_ + (1 - b1) * g for m_, g in zip(state.m, g_arrays)]
    v = [b2 * v_ + (1 - b2) * g * g for v_, g in zip(state.v, g_arrays)]
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new = [p - lr * (m_ / c1) / (np.sqrt(v_ / c2) + state.eps) for p, m_, v_ in zip(p_arrays, m, v)]
    return params.with_arrays(new), AdamState(m, v, t, b1, b2, state.eps)


def params_to_dict(params: MlpParams) -> dict:
    return {
        "format": PARAMS_FORMAT,
        "layer_dims": params.layer_dims,
        "activations": params.activations,
        "layers": [
            {
                "weight": layer.weight.tolist(),
                "bias": None if layer.bias is None else layer.bias.tolist(),
            }
            for layer in params.layers
        ],
    }


def params_from_dict(d: dict) -> MlpParams:
    if d.get("format") != PARAMS_FORMAT:
        raise ConfigError(f"unsupported parameter format {d.get('format')!r}")
    dims = d["layer_dims"]
    layers = []
    for k, (entry, act) in enumerate(zip(d["layers"], d["activations"])):
        w = np.array(entry["weight"], dtype=np.float64).reshape(dims[k + 1], dims[k])
        b = None if entry["bias"] is None else np.array(entry["bias"], dtype=np.float64)
        layers.append(Layer(w, b, act))
    return MlpParams(tuple(layers))


def save_params(params: MlpParams, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    Path(path).write_text(json.dumps(params_to_dict(params)))


def load_params(path) -> MlpParams:
    return params_from_dict(json.loads(Path(path).read_text()))
