"""Embedding datasets: binary storage, manifests, fold splitting, synthesis.

Storage is a small language-neutral binary format plus a CSV manifest:

* embedding file, little-endian: magic ``NVEB`` | format version ``u32`` = 1
  | dim ``u32`` | count ``u32`` | ``count * dim`` float32 values, row-major;
* manifest CSV, UTF-8, header exactly ``sample_id,label,speaker,dataset``,
  one row per embedding row, in row order, with ``label`` holding the label
  name;
* optional label vocabulary file: one label name per line, line index =
  class id. Without it the vocabulary is the sorted set of manifest labels.
"""

from __future__ import annotations

import csv

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, StratificationError

MAGIC = b"NVEB"
FORMAT_VERSION = 1
MANIFEST_HEADER = ["sample_id", "label", "speaker", "dataset"]


@dataclass
class EmbeddingDataset:
    """Pooled embeddings for one (corpus, foundation model) pair.

    All per-sample lists run parallel to the rows of ``vectors``.
    ``speakers`` is ``None`` when the manifest carries no speaker ids.
    """

    fm_name: str
    dim: int
    vectors: np.ndarray
    sample_ids: list[str]
    labels: np.ndarray
    label_names: list[str]
    speakers: list[str] | None = None
    corpus_tags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = len(self)
        if self.vectors.shape != (n, self.dim):
            raise DataError(
                f"vectors shape {self.vectors.shape} does not match "
                f"{n} samples of dim {self.dim}"
            )
        if len(self.labels) != n or (self.speakers is not None and len(self.speakers) != n):
            raise DataError("parallel manifest lists disagree on sample count")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.label_names)):
            raise DataError(
                f"labels outside [0, {len(self.label_names)}) in dataset {self.fm_name}"
            )
        if not self.corpus_tags:
            self.corpus_tags = [""] * n

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    def subset(self, indices: np.ndarray) -> "EmbeddingDataset":
        indices = np.asarray(indices)
        return EmbeddingDataset(
            fm_name=self.fm_name,
            dim=self.dim,
            vectors=self.vectors[indices],
            sample_ids=[self.sample_ids[i] for i in indices],
            labels=self.labels[indices],
            label_names=self.label_names,
            speakers=None if self.speakers is None else [self.speakers[i] for i in indices],
            corpus_tags=[self.corpus_tags[i] for i in indices],
        )


# ---------------------------------------------------------------------------
# binary embedding file
# ---------------------------------------------------------------------------


def write_embeddings(path, vectors: np.ndarray) -> None:
    """Write a ``[count, dim]`` float32 matrix in the binary embedding format."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise DataError(f"embedding matrix must be 2-D, got shape {vectors.shape}")
    count, dim = vectors.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, dim, count))
        f.write(vectors.astype("<f4").tobytes())


def read_embeddings(path) -> np.ndarray:
    """Read an embedding file back into a ``[count, dim]`` float32 matrix."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"embedding file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 16:
        raise DataError(f"{path}: too short to hold an embedding header")
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    version, dim, count = struct.unpack("<III", raw[4:16])
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported format version {version}")
    expected = 16 + 4 * dim * count
    if len(raw) != expected:
        raise DataError(
            f"{path}: payload holds {len(raw) - 16} bytes, "
            f"expected {expected - 16} for {count} x {dim} float32"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=16)
    return flat.reshape(count, dim).astype(np.float32)


# ---------------------------------------------------------------------------
# manifest and vocabulary
# ---------------------------------------------------------------------------


def write_manifest(path, rows: Sequence[tuple[str, str, str, str]]) -> None:
    """Write manifest rows of ``(sample_id, label, speaker, dataset)``."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_HEADER)
        writer.writerows(rows)


def read_manifest(path) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty manifest") from None
        if header != MANIFEST_HEADER:
            raise DataError(
                f"{path}: manifest header {header} != {MANIFEST_HEADER}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(MANIFEST_HEADER):
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(row)}")
            rows.append(dict(zip(MANIFEST_HEADER, row)))
    return rows


def write_label_vocabulary(path, names: Sequence[str]) -> None:
    Path(path).write_text("".join(f"{name}\n" for name in names), encoding="utf-8")


def read_label_vocabulary(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"label vocabulary not found: {path}")
    names = [line for line in path.read_text(encoding="utf-8").splitlines() if line]
    if not names:
        raise DataError(f"{path}: empty label vocabulary")
    return names


def load_dataset(embeddings_path, manifest_path, labels_path=None) -> EmbeddingDataset:
    """Load and cross-validate an embedding file against its manifest.

    Rows align by order. Without an explicit vocabulary the class ids follow
    the sorted distinct label names of the manifest.
    """
    vectors = read_embeddings(embeddings_path)
    rows = read_manifest(manifest_path)
    if len(rows) != vectors.shape[0]:
        raise DataError(
            f"manifest rows ({len(rows)}) do not match embedding rows "
            f"({vectors.shape[0]})"
        )
    bad = np.nonzero(~np.isfinite(vectors).all(axis=1))[0]
    if bad.size:
        raise DataError(f"non-finite embedding value at row {int(bad[0])}")

    if labels_path is not None:
        label_names = read_label_vocabulary(labels_path)
    else:
        label_names = sorted({row["label"] for row in rows})
    name_to_id = {name: i for i, name in enumerate(label_names)}
    labels = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        if row["label"] not in name_to_id:
            raise DataError(
                f"manifest row {i}: label {row['label']!r} not in vocabulary"
            )
        labels[i] = name_to_id[row["label"]]

    speakers = [row["speaker"] for row in rows]
    return EmbeddingDataset(
        fm_name=Path(embeddings_path).stem,
        dim=vectors.shape[1],
        vectors=vectors,
        sample_ids=[row["sample_id"] for row in rows],
        labels=labels,
        label_names=label_names,
        speakers=None if all(s == "" for s in speakers) else speakers,
        corpus_tags=[row["dataset"] for row in rows],
    )


def save_dataset(dataset: EmbeddingDataset, embeddings_path, manifest_path, labels_path=None) -> None:
    write_embeddings(embeddings_path, dataset.vectors)
    speakers = dataset.speakers or [""] * len(dataset)
    write_manifest(
        manifest_path,
        [
            (sid, dataset.label_names[lab], spk, tag)
            for sid, lab, spk, tag in zip(
                dataset.sample_ids, dataset.labels, speakers, dataset.corpus_tags
            )
        ],
    )
    if labels_path is not None:
        write_label_vocabulary(labels_path, dataset.label_names)


# ---------------------------------------------------------------------------
# fold planning
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldPlan:
    """Per-sample fold assignment for k-fold cross-validation."""

    k: int
    assignments: np.ndarray
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments == fold)[0]

    def train_indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignments != fold)[0]

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "k": self.k, "assignments": self.assignments.tolist()}
        )


def stratified_kfold(dataset: EmbeddingDataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign each sample a fold, round-robin per class after a seeded shuffle.

    Per-class fold counts differ by at most one. A class with fewer than
    ``k`` samples cannot be stratified and is an error.
    """
    if k < 2:
        raise ConfigError(f"k-fold needs k >= 2, got {k}")
    rng = np.random.default_rng(seed)
    assignments = np.full(len(dataset), -1, dtype=np.int64)
    for class_id in range(dataset.num_classes):
        members = np.nonzero(dataset.labels == class_id)[0]
        if len(members) < k:
            raise StratificationError(
                f"class {dataset.label_names[class_id]!r} has {len(members)} "
                f"samples, fewer than k={k}"
            )
        members = rng.permutation(members)
        assignments[members] = np.arange(len(members)) % k
    return FoldPlan(k=k, assignments=assignments, seed=seed)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


def synth_generate(
    num_classes: int,
    per_class: int,
    dims: Sequence[int],
    separation: float = 8.0,
    seed: int = 0,
) -> list[EmbeddingDataset]:
    """Generate one or two aligned synthetic embedding views.

    Each class is an isotropic unit-variance Gaussian centered at
    ``separation`` times a seeded random unit direction; every view draws
    its own directions, standing in for heterogeneous upstream models.
    Labels and sample ids are shared across views.
    """
    if num_classes < 1 or per_class < 1:
        raise ConfigError("num_classes and per_class must be positive")
    if not dims or len(dims) > 2 or any(d < 1 for d in dims):
        raise ConfigError(f"dims must hold one or two positive integers, got {dims}")
    if separation < 0:
        raise ConfigError(f"separation must be non-negative, got {separation}")

    rng = np.random.default_rng(seed)
    n = num_classes * per_class
    labels = np.repeat(np.arange(num_classes), per_class)
    sample_ids = [f"synth_{i:05d}" for i in range(n)]
    label_names = [f"class_{c}" for c in range(num_classes)]

    views = []
    for v, dim in enumerate(dims):
        directions = rng.standard_normal((num_classes, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        vectors = separation * directions[labels] + rng.standard_normal((n, dim))
        views.append(
            EmbeddingDataset(
                fm_name=f"synthetic_view{v}",
                dim=dim,
                vectors=vectors.astype(np.float32),
                sample_ids=sample_ids,
                labels=labels.copy(),
                label_names=label_names,
                speakers=None,
                corpus_tags=["synthetic"] * n,
            )
        )
    return views
