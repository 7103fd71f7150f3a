"""Model construction for the four network families.

Single-view classifiers (FCN, CNN) and two-view fusion models (CONCAT,
RENO) are all built from the same parts:

* a conv stem of two blocks (32 then 64 filters, kernel 3, each followed
  by ReLU and a 2-wide max-pool), ending in an adaptive max-pool to a
  fixed token count so the flattened width never depends on the embedding
  dimension;
* an optional per-branch self-attention over the token form
  ``[tokens, 64]`` (RENO only), applied as a residual refinement
  ``x + attn(x)`` so the near-uniform attention of a fresh network cannot
  collapse the tokens to their average;
* a dense projection to a shared width, whose outputs are the "alignment
  taps" the divergence loss compares across branches (fusion models);
* a fusion stage: the two projected vectors either attend to each other
  as a 2-token sequence (RENO) or are simply concatenated (CONCAT);
* a classifier head of two dense layers (512, 128) with ReLU and dropout,
  then a softmax output layer.

RENO minus its attention blocks is layer-for-layer the CONCAT baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .layers import ConvBlock, Dense, Dropout, Graph, MultiHeadSelfAttention
from .tensor import Tensor

KINDS = ("FCN", "CNN", "CONCAT", "RENO")

CONV_FILTERS = (32, 64)
HEAD_WIDTHS = (512, 128)
MIN_INPUT_DIM = 16


@dataclass(frozen=True)
class ModelSpec:
    """Declarative description of a network.

    ``input_dims`` holds one embedding size for FCN/CNN and exactly two for
    the fusion kinds. ``common_dim`` is the shared projection width of the
    alignment taps; ``pooled_tokens`` the fixed token count after the
    adaptive pool.
    """

    kind: str
    input_dims: tuple[int, ...]
    num_classes: int
    dropout_rate: float = 0.3
    heads: int = 2
    common_dim: int = 128
    pooled_tokens: int = 16

    def __post_init__(self):
        object.__setattr__(self, "input_dims", tuple(int(d) for d in self.input_dims))
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        expected_views = 2 if self.kind in ("CONCAT", "RENO") else 1
        if len(self.input_dims) != expected_views:
            raise ConfigError(
                f"{self.kind} takes exactly {expected_views} input dimension(s), "
                f"got {list(self.input_dims)}"
            )
        if any(d < 1 for d in self.input_dims):
            raise ConfigError(f"input dimensions must be positive, got {list(self.input_dims)}")
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout rate must lie in [0, 1), got {self.dropout_rate}")
        if self.heads < 1 or self.common_dim < 1 or self.pooled_tokens < 1:
            raise ConfigError("heads, common_dim and pooled_tokens must be positive")

    @property
    def num_views(self) -> int:
        return len(self.input_dims)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_dims": list(self.input_dims),
            "num_classes": self.num_classes,
            "dropout_rate": self.dropout_rate,
            "heads": self.heads,
            "common_dim": self.common_dim,
            "pooled_tokens": self.pooled_tokens,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            kind=d["kind"],
            input_dims=tuple(d["input_dims"]),
            num_classes=d["num_classes"],
            dropout_rate=d.get("dropout_rate", 0.3),
            heads=d.get("heads", 2),
            common_dim=d.get("common_dim", 128),
            pooled_tokens=d.get("pooled_tokens", 16),
        )


@dataclass
class ForwardResult:
    """One forward pass: class probabilities plus, for RENO, the taps."""

    probs: Tensor
    taps: tuple[Tensor, Tensor] | None = None


class _ClassifierHead:
    """Two hidden dense layers with ReLU and dropout, then a softmax output."""

    def __init__(self, graph: Graph, name: str, d_in: int, num_classes: int, dropout_rate: float):
        self.fc1 = Dense(graph, f"{name}.fc1", d_in, HEAD_WIDTHS[0])
        self.fc2 = Dense(graph, f"{name}.fc2", HEAD_WIDTHS[0], HEAD_WIDTHS[1])
        self.out = Dense(graph, f"{name}.out", HEAD_WIDTHS[1], num_classes)
        self.drop = Dropout(graph, dropout_rate)

    def __call__(self, x: Tensor) -> Tensor:
        x = self.drop(T.relu(self.fc1(x)))
        x = self.drop(T.relu(self.fc2(x)))
        return T.softmax(self.out(x))


class _ConvStem:
    """Two conv blocks plus the adaptive pool to a fixed token count."""

    def __init__(self, graph: Graph, name: str, input_dim: int, pooled_tokens: int):
        if input_dim < MIN_INPUT_DIM:
            raise ShapeError(
                f"input dimension {input_dim} too short for the conv stem; "
                f"need at least {MIN_INPUT_DIM}"
            )
        self.pooled_tokens = pooled_tokens
        self.conv1 = ConvBlock(graph, f"{name}.conv1", 1, CONV_FILTERS[0])
        self.conv2 = ConvBlock(graph, f"{name}.conv2", CONV_FILTERS[0], CONV_FILTERS[1])

    def __call__(self, x: Tensor) -> Tensor:
        batch = x.shape[0]
        h = T.reshape(x, (batch, 1, x.shape[1]))
        h = self.conv2(self.conv1(h))
        return T.adaptive_maxpool1d(h, self.pooled_tokens)  # [b, 64, tokens]


class _Branch:
    """Conv stem, optional token attention, flatten, projection to the shared width."""

    def __init__(self, graph: Graph, name: str, spec: ModelSpec, input_dim: int, with_attention: bool):
        self.stem = _ConvStem(graph, name, input_dim, spec.pooled_tokens)
        self.attn = (
            MultiHeadSelfAttention(graph, f"{name}.attn", CONV_FILTERS[1], spec.heads)
            if with_attention
            else None
        )
        flat_width = CONV_FILTERS[1] * spec.pooled_tokens
        self.proj = Dense(graph, f"{name}.proj", flat_width, spec.common_dim)
        self.flat_width = flat_width

    def __call__(self, x: Tensor) -> Tensor:
        h = self.stem(x)
        tokens = T.transpose(h, (0, 2, 1))  # [b, tokens, 64]
        if self.attn is not None:
            tokens = T.add(tokens, self.attn(tokens))
        flat = T.reshape(tokens, (x.shape[0], self.flat_width))
        return self.proj(flat)


class BuiltModel:
    """A constructed network: graph, spec, and the forward computation.

    ``forward`` takes one numpy matrix per view, each ``[batch, dim]``, and
    rebuilds the autodiff graph for that batch. ``has_alignment_taps`` is
    true only for RENO, whose result carries the two projected branch
    vectors the divergence loss compares.
    """

    def __init__(self, spec: ModelSpec, graph: Graph):
        self.spec = spec
        self.graph = graph
        self._head: _ClassifierHead | None = None
        self._branches: list[_Branch] = []
        self._stem: _ConvStem | None = None
        self._fusion_attn: MultiHeadSelfAttention | None = None

    @property
    def has_alignment_taps(self) -> bool:
        return self.spec.kind == "RENO"

    def _check_views(self, views: Sequence[np.ndarray]) -> list[Tensor]:
        if len(views) != self.spec.num_views:
            raise ShapeError(
                f"{self.spec.kind} expects {self.spec.num_views} view(s), got {len(views)}"
            )
        tensors = []
        for i, (view, dim) in enumerate(zip(views, self.spec.input_dims)):
            arr = np.asarray(view, dtype=self.graph.dtype)
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise ShapeError(
                    f"view {i} must be [batch, {dim}], got {arr.shape}"
                )
            tensors.append(Tensor(arr))
        batches = {t.shape[0] for t in tensors}
        if len(batches) != 1:
            raise ShapeError(f"views disagree on batch size: {sorted(batches)}")
        return tensors

    def forward(self, views: Sequence[np.ndarray]) -> ForwardResult:
        inputs = self._check_views(views)
        kind = self.spec.kind
        if kind == "FCN":
            return ForwardResult(probs=self._head(inputs[0]))
        if kind == "CNN":
            pooled = self._stem(inputs[0])
            flat = T.reshape(pooled, (inputs[0].shape[0], CONV_FILTERS[1] * self.spec.pooled_tokens))
            return ForwardResult(probs=self._head(flat))

        taps = tuple(branch(x) for branch, x in zip(self._branches, inputs))
        batch = inputs[0].shape[0]
        common = self.spec.common_dim
        if kind == "RENO":
            stacked = T.concat(
                [T.reshape(t, (batch, 1, common)) for t in taps], axis=1
            )
            refined = T.add(stacked, self._fusion_attn(stacked))
            fused = T.reshape(refined, (batch, 2 * common))
            return ForwardResult(probs=self._head(fused), taps=taps)
        fused = T.concat(list(taps), axis=1)
        return ForwardResult(probs=self._head(fused))

    def predict_proba(self, views: Sequence[np.ndarray]) -> np.ndarray:
        """Evaluation-mode class probabilities as a plain array."""
        was_training = self.graph.training
        self.graph.eval()
        try:
            return self.forward(views).probs.data.copy()
        finally:
            self.graph.training = was_training

    def predict(self, views: Sequence[np.ndarray]) -> np.ndarray:
        return self.predict_proba(views).argmax(axis=1)


def build_fcn(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> BuiltModel:
    """Dense classifier straight on the embedding vector."""
    if spec.kind != "FCN":
        raise ConfigError(f"build_fcn got spec of kind {spec.kind}")
    graph = Graph(seed, dtype)
    model = BuiltModel(spec, graph)
    model._head = _ClassifierHead(graph, "head", spec.input_dims[0], spec.num_classes, spec.dropout_rate)
    return model


def build_cnn(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> BuiltModel:
    """Conv stem over the embedding treated as a single-channel sequence."""
    if spec.kind != "CNN":
        raise ConfigError(f"build_cnn got spec of kind {spec.kind}")
    graph = Graph(seed, dtype)
    model = BuiltModel(spec, graph)
    model._stem = _ConvStem(graph, "stem", spec.input_dims[0], spec.pooled_tokens)
    model._head = _ClassifierHead(
        graph, "head", CONV_FILTERS[1] * spec.pooled_tokens, spec.num_classes, spec.dropout_rate
    )
    return model


def build_reno(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> BuiltModel:
    """Two conv branches with token attention, divergence taps, and attention fusion."""
    if spec.kind != "RENO":
        raise ConfigError(f"build_reno got spec of kind {spec.kind}")
    graph = Graph(seed, dtype)
    model = BuiltModel(spec, graph)
    model._branches = [
        _Branch(graph, f"branch{i}", spec, dim, with_attention=True)
        for i, dim in enumerate(spec.input_dims)
    ]
    model._fusion_attn = MultiHeadSelfAttention(graph, "fusion.attn", spec.common_dim, spec.heads)
    model._head = _ClassifierHead(
        graph, "head", 2 * spec.common_dim, spec.num_classes, spec.dropout_rate
    )
    return model


def build_concat_fusion(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> BuiltModel:
    """The RENO layout with every attention block removed; plain concatenation."""
    if spec.kind != "CONCAT":
        raise ConfigError(f"build_concat_fusion got spec of kind {spec.kind}")
    graph = Graph(seed, dtype)
    model = BuiltModel(spec, graph)
    model._branches = [
        _Branch(graph, f"branch{i}", spec, dim, with_attention=False)
        for i, dim in enumerate(spec.input_dims)
    ]
    model._head = _ClassifierHead(
        graph, "head", 2 * spec.common_dim, spec.num_classes, spec.dropout_rate
    )
    return model


_BUILDERS = {
    "FCN": build_fcn,
    "CNN": build_cnn,
    "RENO": build_reno,
    "CONCAT": build_concat_fusion,
}


def build_model(spec: ModelSpec, seed: int = 0, dtype=np.float32) -> BuiltModel:
    return _BUILDERS[spec.kind](spec, seed=seed, dtype=dtype)


def param_count(model: BuiltModel | Graph) -> int:
    """Exact number of trainable scalars in the model."""
    graph = model.graph if isinstance(model, BuiltModel) else model
    return graph.param_count()


def save_model(path, model: BuiltModel) -> None:
    """Write spec and parameter values to a single ``.npz`` archive."""
    payload = {f"param/{name}": p.value.data for name, p in model.graph.params.items()}
    payload["spec_json"] = np.array(json.dumps(model.spec.to_json_dict()))
    np.savez(path, **payload)


def load_model(path, dtype=np.float32) -> BuiltModel:
    """Rebuild a saved model; stored values overwrite the fresh initialization."""
    with np.load(path, allow_pickle=False) as archive:
        spec = ModelSpec.from_json_dict(json.loads(str(archive["spec_json"])))
        state = {
            key[len("param/"):]: archive[key]
            for key in archive.files
            if key.startswith("param/")
        }
    model = build_model(spec, seed=0, dtype=dtype)
    model.graph.load_state_dict(state)
    return model
