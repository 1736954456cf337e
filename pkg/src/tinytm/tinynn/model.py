"""Histogram-to-raw-output network: layers, forward pass, backprop, counters.

Everything is plain numpy. Activations flow as ``(batch, channels, length)``
through the convolutional part and ``(batch, features)`` after flattening.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

MAX_PARAMS = 1100
MAX_FLOPS = 9000
INPUT_SHAPE = (2, 256)
NUM_OUTPUTS = 4


class BudgetError(ValueError):
    """Architecture or weights exceed the parameter/FLOP budget."""


class ShapeError(ValueError):
    """Weights do not fit the architecture."""


@dataclass(frozen=True)
class Scale:
    """Fixed elementwise input transform ``factor * x**power`` (no weights)."""

    factor: float
    power: float = 1.0


@dataclass(frozen=True)
class Conv1d:
    name: str
    in_channels: int
    out_channels: int
    kernel: int
    stride: int


@dataclass(frozen=True)
class Dense:
    name: str
    in_features: int
    out_features: int


@dataclass(frozen=True)
class Activation:
    kind: str = "tanh"


@dataclass(frozen=True)
class Flatten:
    pass


Layer = Union[Scale, Conv1d, Dense, Activation, Flatten]


@dataclass(frozen=True)
class Architecture:
    layers: tuple

    def shapes(self) -> list[tuple]:
        """Per-sample activation shape after each layer, input first."""
        shape = INPUT_SHAPE
        out = [shape]
        for layer in self.layers:
            if isinstance(layer, Conv1d):
                ch, length = shape
                if ch != layer.in_channels:
                    raise ShapeError(f"{layer.name}: expects {layer.in_channels} channels, got {ch}")
                if length < layer.kernel:
                    raise ShapeError(f"{layer.name}: input shorter than kernel")
                shape = (layer.out_channels, (length - layer.kernel) // layer.stride + 1)
            elif isinstance(layer, Dense):
                if shape != (layer.in_features,):
                    raise ShapeError(f"{layer.name}: expects {layer.in_features} features, got {shape}")
                shape = (layer.out_features,)
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
            out.append(shape)
        if shape != (NUM_OUTPUTS,):
            raise ShapeError(f"network must end with {NUM_OUTPUTS} outputs, got {shape}")
        return out

    def tensor_shapes(self) -> dict[str, tuple]:
        shapes = {}
        for layer in self.layers:
            if isinstance(layer, Conv1d):
                shapes[f"{layer.name}.weight"] = (layer.out_channels, layer.in_channels, layer.kernel)
                shapes[f"{layer.name}.bias"] = (layer.out_channels,)
            elif isinstance(layer, Dense):
                shapes[f"{layer.name}.weight"] = (layer.out_features, layer.in_features)
                shapes[f"{layer.name}.bias"] = (layer.out_features,)
        return shapes


# The input is the Hellinger (square-root) embedding of each normalized
# histogram, scaled so a single-bin spike maps to 4 and a uniform bin to 0.25,
# which keeps the first tanh layer responsive for both. Convolutions are
# non-overlapping (kernel == stride) and their features are flattened rather
# than pooled, because bin position encodes intensity.
REFERENCE = Architecture(
    (
        Scale(4.0, power=0.5),
        Conv1d("conv1", 2, 4, kernel=8, stride=8),
        Activation(),
        Conv1d("conv2", 4, 8, kernel=4, stride=4),
        Activation(),
        Flatten(),
        Dense("dense1", 64, 10),
        Activation(),
        Dense("dense2", 10, NUM_OUTPUTS),
    )
)


def count_params(arch: Architecture) -> int:
    return sum(int(np.prod(s)) for s in arch.tensor_shapes().values())


def layer_flops(arch: Architecture) -> list[tuple[str, int]]:
    """FLOPs per layer: a multiply-accumulate is 2, a bias add or nonlinearity 1.

    The input transform costs one FLOP per element for the root and one for
    the scale, each only when it is not the identity.
    """
    shapes = arch.shapes()
    out = []
    for i, layer in enumerate(arch.layers):
        before, after = shapes[i], shapes[i + 1]
        if isinstance(layer, Scale):
            ops = (layer.power != 1.0) + (layer.factor != 1.0)
            out.append(("scale", ops * int(np.prod(before))))
        elif isinstance(layer, Conv1d):
            n_out = int(np.prod(after))
            macs = n_out * layer.in_channels * layer.kernel
            out.append((layer.name, 2 * macs + n_out))
        elif isinstance(layer, Dense):
            out.append((layer.name, 2 * layer.in_features * layer.out_features + layer.out_features))
        elif isinstance(layer, Activation):
            out.append((layer.kind, int(np.prod(after))))
    return out


def count_flops(arch: Architecture) -> int:
    return sum(f for _, f in layer_flops(arch))


def check_budget(arch: Architecture) -> None:
    params, flops = count_params(arch), count_flops(arch)
    if params > MAX_PARAMS:
        raise BudgetError(f"{params} parameters exceed the budget of {MAX_PARAMS}")
    if flops > MAX_FLOPS:
        raise BudgetError(f"{flops} FLOPs exceed the budget of {MAX_FLOPS}")


class ModelWeights:
    """Named parameter tensors for an :class:`Architecture`."""

    version = "v1"

    def __init__(self, tensors: dict[str, np.ndarray], arch: Architecture = REFERENCE):
        expected = arch.tensor_shapes()
        if list(tensors) != list(expected):
            raise ShapeError(f"layer names {list(tensors)} do not match {list(expected)}")
        for name, shape in expected.items():
            if tuple(np.shape(tensors[name])) != shape:
                raise ShapeError(f"{name}: shape {np.shape(tensors[name])}, expected {shape}")
            if not np.all(np.isfinite(tensors[name])):
                raise ValueError(f"{name}: non-finite values")
        self.tensors = {k: np.asarray(v) for k, v in tensors.items()}
        self.arch = arch

    def __getitem__(self, name):
        return self.tensors[name]

    def __eq__(self, other):
        if not isinstance(other, ModelWeights):
            return NotImplemented
        return self.arch == other.arch and all(
            np.array_equal(self.tensors[k], other.tensors[k]) for k in self.tensors
        )

    __hash__ = None

    @property
    def param_count(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights({k: v.astype(dtype) for k, v in self.tensors.items()}, self.arch)

    def copy(self) -> "ModelWeights":
        return ModelWeights({k: v.copy() for k, v in self.tensors.items()}, self.arch)

    def map(self, fn) -> "ModelWeights":
        return ModelWeights({k: fn(v) for k, v in self.tensors.items()}, self.arch)


def init_weights(arch: Architecture, rng: np.random.Generator) -> ModelWeights:
    """He-uniform weights, zero biases, float64."""
    tensors = {}
    for name, shape in arch.tensor_shapes().items():
        if name.endswith(".bias"):
            tensors[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            tensors[name] = rng.uniform(-bound, bound, shape)
    return ModelWeights(tensors, arch)


def zero_weights(arch: Architecture = REFERENCE) -> ModelWeights:
    return ModelWeights({k: np.zeros(s) for k, s in arch.tensor_shapes().items()}, arch)


def _window_index(length: int, kernel: int, stride: int) -> np.ndarray:
    n_out = (length - kernel) // stride + 1
    return stride * np.arange(n_out)[:, None] + np.arange(kernel)[None, :]


def _activate(kind, z):
    if kind == "softplus":
        return np.logaddexp(0.0, z)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    raise ValueError(f"unknown activation {kind!r}")


def _activate_grad(kind, z, y):
    if kind == "softplus":
        return 0.5 * (1.0 + np.tanh(0.5 * z))  # logistic(z), overflow-free
    if kind == "relu":
        return (z > 0).astype(z.dtype)
    return 1.0 - y * y


def as_batch(hists) -> np.ndarray:
    """Accept a HistogramPair, a (2, 256) array, or a (B, 2, 256) batch."""
    if hasattr(hists, "stacked"):
        hists = hists.stacked()
    x = np.asarray(hists, dtype=np.float64)
    if x.shape == INPUT_SHAPE:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != INPUT_SHAPE:
        raise ShapeError(f"expected input of shape (B, 2, 256), got {x.shape}")
    return x


def forward(w: ModelWeights, hists, return_cache: bool = False):
    """Raw network outputs of shape ``(B, 4)``, computed in double precision."""
    x = as_batch(hists)
    cache = []
    for layer in w.arch.layers:
        if isinstance(layer, Scale):
            cache.append(None)
            x = layer.factor * (x if layer.power == 1.0 else np.power(x, layer.power))
        elif isinstance(layer, Conv1d):
            W = w[f"{layer.name}.weight"].astype(np.float64)
            b = w[f"{layer.name}.bias"].astype(np.float64)
            B, C, L = x.shape
            idx = _window_index(L, layer.kernel, layer.stride)
            cols = x[:, :, idx].transpose(0, 2, 1, 3).reshape(B * idx.shape[0], -1)
            cache.append((cols, L))
            y = cols @ W.reshape(layer.out_channels, -1).T + b
            x = y.reshape(B, idx.shape[0], layer.out_channels).transpose(0, 2, 1)
        elif isinstance(layer, Dense):
            W = w[f"{layer.name}.weight"].astype(np.float64)
            b = w[f"{layer.name}.bias"].astype(np.float64)
            cache.append(x)
            x = x @ W.T + b
        elif isinstance(layer, Activation):
            y = _activate(layer.kind, x)
            cache.append((x, y))
            x = y
        elif isinstance(layer, Flatten):
            cache.append(x.shape)
            x = x.reshape(x.shape[0], -1)
    if return_cache:
        return x, cache
    return x


def backprop(w: ModelWeights, cache: list, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar with respect to every tensor, given d/d(raw outputs)."""
    grads = {}
    g = np.asarray(grad_out, dtype=np.float64)
    for i in range(len(w.arch.layers) - 1, -1, -1):
        layer, c = w.arch.layers[i], cache[i]
        need_input_grad = i > 0
        if isinstance(layer, Scale):
            if need_input_grad:
                if layer.power != 1.0:
                    raise ShapeError("only a linear Scale may follow another layer")
                g = g * layer.factor
        elif isinstance(layer, Conv1d):
            cols, L = c
            W = w[f"{layer.name}.weight"].astype(np.float64)
            B, Cout, Lout = g.shape
            gm = g.transpose(0, 2, 1).reshape(B * Lout, Cout)
            grads[f"{layer.name}.weight"] = (gm.T @ cols).reshape(W.shape)
            grads[f"{layer.name}.bias"] = gm.sum(axis=0)
            if need_input_grad:
                gcols = (gm @ W.reshape(Cout, -1)).reshape(B, Lout, layer.in_channels, layer.kernel)
                gx = np.zeros((B, layer.in_channels, L))
                span = layer.stride * (Lout - 1) + 1
                for k in range(layer.kernel):
                    gx[:, :, k : k + span : layer.stride] += gcols[:, :, :, k].transpose(0, 2, 1)
                g = gx
        elif isinstance(layer, Dense):
            W = w[f"{layer.name}.weight"].astype(np.float64)
            grads[f"{layer.name}.weight"] = g.T @ c
            grads[f"{layer.name}.bias"] = g.sum(axis=0)
            if need_input_grad:
                g = g @ W
        elif isinstance(layer, Activation):
            z, y = c
            g = g * _activate_grad(layer.kind, z, y)
        elif isinstance(layer, Flatten):
            g = g.reshape(c)
    return {k: grads[k] for k in w.tensors}
