"""Dense feed-forward networks with exact backpropagation and the Adam optimizer.

Networks are stacks of fully-connected layers. One layer may take an auxiliary
input concatenated to its regular input (the critic merges the action this way).
Batches are row-per-sample matrices; a 1-D input is treated as a batch of one
and the output is returned 1-D as well.
"""

from __future__ import annotations

import copy
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from mapless_planner.constants import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    DEFAULT_LR,
    FINAL_LAYER_INIT,
)


class ShapeError(ValueError):
    """Input, auxiliary or gradient widths do not match the network."""


class StaleCacheError(ValueError):
    """A forward cache was used with a different or since-updated network."""


class DivergenceError(FloatingPointError):
    """A loss or gradient became non-finite."""


class Activation(str, Enum):
    RELU = "relu"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    LINEAR = "linear"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.SIGMOID:
            return expit(z)
        return z.copy()

    def derivative(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """d(act)/dz evaluated from the pre-activation ``z`` and its output ``a``."""
        if self is Activation.RELU:
            return (z > 0.0).astype(np.float64)
        if self is Activation.TANH:
            return 1.0 - a * a
        if self is Activation.SIGMOID:
            return a * (1.0 - a)
        return np.ones_like(z)


# A layer uses one activation for every unit, or one per output unit.
LayerActivation = Activation | tuple[Activation, ...]


def _activate(act: LayerActivation, z: np.ndarray) -> np.ndarray:
    if isinstance(act, Activation):
        return act.apply(z)
    return np.column_stack([a.apply(z[:, j]) for j, a in enumerate(act)])


def _activation_grad(act: LayerActivation, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if isinstance(act, Activation):
        return act.derivative(z, a)
    return np.column_stack([f.derivative(z[:, j], a[:, j]) for j, f in enumerate(act)])


@dataclass
class Layer:
    """Fully-connected layer computing ``act(x @ W.T + b)``."""

    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    act: LayerActivation = Activation.RELU

    def __post_init__(self) -> None:
        self.W = np.asarray(self.W, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2 or self.b.ndim != 1:
            raise ShapeError("W must be 2-D and b 1-D")
        if self.b.shape[0] != self.W.shape[0]:
            raise ShapeError(f"bias length {self.b.shape[0]} != W rows {self.W.shape[0]}")
        if isinstance(self.act, str):
            self.act = Activation(self.act)
        else:
            self.act = tuple(Activation(a) for a in self.act)
            if len(self.act) != self.W.shape[0]:
                raise ShapeError("per-unit activations must match the layer width")

    @property
    def in_width(self) -> int:
        return self.W.shape[1]

    @property
    def out_width(self) -> int:
        return self.W.shape[0]


@dataclass
class Mlp:
    """Ordered stack of layers with an optional auxiliary-input merge point.

    ``merge_point`` is the 0-based index of the layer whose input is the
    previous layer's output concatenated with ``aux_width`` auxiliary values.
    """

    layers: list[Layer]
    merge_point: int | None = None
    aux_width: int = 0
    version: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        if self.merge_point is None:
            if self.aux_width:
                raise ShapeError("aux_width set without a merge_point")
        elif not 0 <= self.merge_point < len(self.layers) or self.aux_width < 1:
            raise ShapeError(f"invalid merge_point {self.merge_point}")
        for i in range(1, len(self.layers)):
            expected = self.layers[i - 1].out_width + self._aux_at(i)
            if self.layers[i].in_width != expected:
                raise ShapeError(
                    f"layer {i} expects {self.layers[i].in_width} inputs, previous gives {expected}"
                )
        if self.in_width < 1:
            raise ShapeError("input width must be positive")

    def _aux_at(self, index: int) -> int:
        return self.aux_width if index == self.merge_point else 0

    @property
    def in_width(self) -> int:
        return self.layers[0].in_width - self._aux_at(0)

    @property
    def out_width(self) -> int:
        return self.layers[-1].out_width

    def params(self) -> list[np.ndarray]:
        """Parameter arrays (W0, b0, W1, b1, ...) by reference."""
        out: list[np.ndarray] = []
        for layer in self.layers:
            out.extend((layer.W, layer.b))
        return out

    def touch(self) -> None:
        """Mark parameters as changed; outstanding forward caches become stale."""
        self.version += 1

    def copy(self) -> Mlp:
        return copy.deepcopy(self)

    def describe(self) -> dict:
        """Shape header used by checkpoints."""
        return {
            "layers": [
                {
                    "in": layer.in_width,
                    "out": layer.out_width,
                    "act": layer.act.value
                    if isinstance(layer.act, Activation)
                    else [a.value for a in layer.act],
                }
                for layer in self.layers
            ],
            "merge_point": self.merge_point,
            "aux_width": self.aux_width,
        }


@dataclass(frozen=True)
class NetShape:
    """Shape description consumed by :func:`init_params`.

    ``sizes`` lists the input width followed by every layer's output width.
    """

    sizes: tuple[int, ...]
    output: LayerActivation = Activation.LINEAR
    hidden: Activation = Activation.RELU
    merge_point: int | None = None
    aux_width: int = 0


@dataclass
class ForwardCache:
    token: tuple[int, int]
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    post: list[np.ndarray]
    squeeze: bool


@dataclass
class AdamState:
    """First/second moments mirroring a parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    alpha: float = DEFAULT_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray], alpha: float = DEFAULT_LR) -> AdamState:
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            alpha=alpha,
        )


def _as_batch(x: np.ndarray | Sequence[float], width: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise ShapeError(f"{what} has shape {np.shape(x)}, expected width {width}")
    return arr


def mlp_forward(
    net: Mlp,
    input: np.ndarray | Sequence[float],
    aux: np.ndarray | Sequence[float] | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network and keep what backprop needs.

    Args:
        net: Network to evaluate
        input: One sample (1-D) or a batch (rows are samples)
        aux: Auxiliary input merged at ``net.merge_point``; required iff it is set

    Returns:
        Tuple of (output, cache); output is 1-D when ``input`` was 1-D
    """
    squeeze = np.ndim(input) == 1
    h = _as_batch(input, net.in_width, "input")
    if (aux is None) != (net.merge_point is None):
        raise ShapeError("aux must be given exactly when the network has a merge point")
    aux_batch = None
    if aux is not None:
        aux_batch = _as_batch(aux, net.aux_width, "aux")
        if aux_batch.shape[0] != h.shape[0]:
            raise ShapeError("aux and input batch sizes differ")

    inputs, pre, post = [], [], []
    for i, layer in enumerate(net.layers):
        if i == net.merge_point:
            h = np.concatenate([h, aux_batch], axis=1)
        inputs.append(h)
        z = h @ layer.W.T + layer.b
        h = _activate(layer.act, z)
        pre.append(z)
        post.append(h)

    cache = ForwardCache((id(net), net.version), inputs, pre, post, squeeze)
    return (h[0] if squeeze else h), cache


def mlp_backward(
    net: Mlp,
    cache: ForwardCache,
    grad_output: np.ndarray | Sequence[float],
) -> tuple[list[np.ndarray], np.ndarray, np.ndarray | None]:
    """Backpropagate ``grad_output`` through the cached forward pass.

    Gradients are summed over the batch rows, i.e. they are the exact gradients
    of the scalar loss whose gradient w.r.t. the output is ``grad_output``.
    Mean-reduced losses scale ``grad_output`` by 1/N themselves.

    Returns:
        Tuple of (param_grads in ``net.params()`` order, grad_input, grad_aux)
    """
    if cache.token != (id(net), net.version) or len(cache.inputs) != len(net.layers):
        raise StaleCacheError("forward cache does not belong to this network state")
    g = _as_batch(grad_output, net.out_width, "grad_output")
    if g.shape[0] != cache.post[-1].shape[0]:
        raise ShapeError("grad_output batch size differs from the cached forward pass")

    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.layers))
    grad_aux = None
    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        dz = g * _activation_grad(layer.act, cache.pre[i], cache.post[i])
        grads[2 * i] = dz.T @ cache.inputs[i]
        grads[2 * i + 1] = dz.sum(axis=0)
        g = dz @ layer.W
        if i == net.merge_point:
            grad_aux = g[:, -net.aux_width :]
            g = g[:, : -net.aux_width]

    if cache.squeeze:
        return grads, g[0], (grad_aux[0] if grad_aux is not None else None)
    return grads, g, grad_aux


def adam_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: AdamState,
) -> tuple[Sequence[np.ndarray], AdamState]:
    """Apply one bias-corrected Adam update in place (descent on ``grads``)."""
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError("params, grads and optimizer state lengths differ")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeError(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        if not np.all(np.isfinite(g)):
            raise DivergenceError("non-finite gradient")

    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def init_params(shape: NetShape, rng: np.random.Generator) -> Mlp:
    """Fan-in uniform hidden layers and a small uniform final layer."""
    sizes = tuple(int(s) for s in shape.sizes)
    if len(sizes) < 2:
        raise ShapeError("shape needs an input width and at least one layer")
    if any(s < 1 for s in sizes):
        raise ShapeError(f"zero-width layer in {sizes}")

    n_layers = len(sizes) - 1
    layers = []
    for i in range(n_layers):
        fan_in = sizes[i] + (shape.aux_width if i == shape.merge_point else 0)
        fan_out = sizes[i + 1]
        last = i == n_layers - 1
        bound = FINAL_LAYER_INIT if last else 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        layers.append(Layer(W, b, shape.output if last else shape.hidden))
    return Mlp(layers, merge_point=shape.merge_point, aux_width=shape.aux_width)
