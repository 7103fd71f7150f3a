"""Parameter containers and the layer set used by every model.

A :class:`Graph` owns the parameter registry, the RNG stream (one 64-bit
seed drives initialization and dropout masks), and the train/eval flag.
Layers register their parameters with hierarchical names at construction
time, so two graphs built with the same seed hold bit-identical initial
values and optimizers can walk parameters in a deterministic order.
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .tensor import Tensor


class Parameter:
    """A trainable tensor with its optimizer state.

    ``first_moment``/``second_moment`` are the Adam accumulators, zero at
    construction and always shaped like ``value``. ``step_count`` advances
    by exactly one per optimizer step.
    """

    def __init__(self, name: str, value: Tensor):
        self.name = name
        self.value = value
        self.first_moment = Tensor(np.zeros_like(value.data))
        self.second_moment = Tensor(np.zeros_like(value.data))
        self.step_count = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Parameter({self.name}, shape={self.shape})"


class Graph:
    """Execution context for one model: parameters, RNG, and mode flags."""

    def __init__(self, seed: int, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(self.seed)
        self.params: dict[str, Parameter] = {}
        self.training = False

    def add_parameter(self, name: str, data: np.ndarray) -> Parameter:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name: {name}")
        param = Parameter(name, Tensor(data.astype(self.dtype)))
        self.params[name] = param
        return param

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.value.zero_grad()

    def train(self, mode: bool = True) -> None:
        self.training = mode

    def eval(self) -> None:
        self.training = False

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.value.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in state:
                raise ConfigError(f"missing parameter in state dict: {name}")
            if state[name].shape != p.value.shape:
                raise ShapeError(
                    f"parameter {name}: stored shape {state[name].shape} "
                    f"does not match model shape {p.value.shape}"
                )
            p.value.data[...] = state[name].astype(self.dtype)

    def param_count(self) -> int:
        return sum(p.value.size for p in self.params.values())


def _uniform(graph: Graph, bound: float, shape: tuple[int, ...]) -> np.ndarray:
    return graph.rng.uniform(-bound, bound, size=shape)


class Dense:
    """Affine layer ``y = x @ W + b`` with scaled-uniform weight init."""

    def __init__(self, graph: Graph, name: str, d_in: int, d_out: int):
        bound = math.sqrt(6.0 / (d_in + d_out))
        self.weight = graph.add_parameter(f"{name}.weight", _uniform(graph, bound, (d_in, d_out)))
        self.bias = graph.add_parameter(f"{name}.bias", np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return T.add_bias(T.matmul(x, self.weight.value), self.bias.value)


class ConvBlock:
    """1-D convolution (valid, stride 1) followed by ReLU and 2-wide max-pool."""

    def __init__(self, graph: Graph, name: str, c_in: int, filters: int, kernel: int = 3):
        bound = math.sqrt(6.0 / (c_in * kernel + filters * kernel))
        self.weight = graph.add_parameter(
            f"{name}.weight", _uniform(graph, bound, (filters, c_in, kernel))
        )
        self.bias = graph.add_parameter(f"{name}.bias", np.zeros(filters))

    def __call__(self, x: Tensor) -> Tensor:
        return T.maxpool1d(T.relu(T.conv1d(x, self.weight.value, self.bias.value)))


class Dropout:
    """Inverted dropout; identity (and RNG-silent) when the graph is in eval mode."""

    def __init__(self, graph: Graph, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
        self.graph = graph
        self.rate = float(rate)

    def __call__(self, x: Tensor) -> Tensor:
        if not self.graph.training or self.rate == 0.0:
            return x
        keep = 1.0 - self.rate
        mask = self.graph.rng.random(x.shape) < keep
        return T.mul_array(x, mask.astype(x.dtype) / keep)


class MultiHeadSelfAttention:
    """Scaled dot-product self-attention over the token axis.

    Per head, ``softmax(Q K^T / sqrt(d_k)) V`` with learned projections
    W_Q, W_K, W_V and an output projection W_O (no biases, no positional
    encoding). Input and output are ``[batch, tokens, d_model]``.

    ``last_attention`` keeps a detached copy of the most recent attention
    weights ``[batch, heads, tokens, tokens]`` for inspection.
    """

    def __init__(self, graph: Graph, name: str, d_model: int, heads: int):
        if d_model % heads != 0:
            raise ConfigError(
                f"d_model {d_model} is not divisible by {heads} heads"
            )
        self.heads = heads
        self.d_model = d_model
        self.d_k = d_model // heads
        bound = math.sqrt(6.0 / (d_model + d_model))
        self.w_q = graph.add_parameter(f"{name}.w_q", _uniform(graph, bound, (d_model, d_model)))
        self.w_k = graph.add_parameter(f"{name}.w_k", _uniform(graph, bound, (d_model, d_model)))
        self.w_v = graph.add_parameter(f"{name}.w_v", _uniform(graph, bound, (d_model, d_model)))
        self.w_o = graph.add_parameter(f"{name}.w_o", _uniform(graph, bound, (d_model, d_model)))
        self.last_attention: np.ndarray | None = None

    def _split_heads(self, x: Tensor, batch: int, tokens: int) -> Tensor:
        x = T.reshape(x, (batch, tokens, self.heads, self.d_k))
        return T.transpose(x, (0, 2, 1, 3))  # [b, h, t, d_k]

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != self.d_model:
            raise ShapeError(
                f"attention expects [batch, tokens, {self.d_model}], got {x.shape}"
            )
        batch, tokens, _ = x.shape
        q = self._split_heads(T.matmul(x, self.w_q.value), batch, tokens)
        k = self._split_heads(T.matmul(x, self.w_k.value), batch, tokens)
        v = self._split_heads(T.matmul(x, self.w_v.value), batch, tokens)

        scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(self.d_k))
        weights = T.softmax(scores)
        self.last_attention = weights.data.copy()

        context = T.transpose(T.matmul(weights, v), (0, 2, 1, 3))
        context = T.reshape(context, (batch, tokens, self.d_model))
        return T.matmul(context, self.w_o.value)
