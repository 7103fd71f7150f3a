"""Training loop, metrics, and cross-validated experiment orchestration.

Each fold trains a fresh model (seeded as ``seed + fold_index``) with
mini-batch Adam, early-stops on validation cross-entropy (the
classification term only, so the alignment loss' constant offset cannot
mask a plateau), restores the best-epoch weights, and scores the untouched
test fold. Fold metrics are aggregated into an experiment report with a
stable JSON form: identical seeds and inputs reproduce the report byte for
byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import EmbeddingDataset, stratified_kfold
from .errors import ConfigError, NumericError, ShapeError
from .losses import LossConfig, cross_entropy, joint_loss, renyi_divergence_loss
from .models import BuiltModel, ModelSpec, build_model, param_count
from .optim import Adam


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings; defaults follow the reference training recipe."""

    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 5
    loss: LossConfig | None = field(default_factory=LossConfig)
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")

    def to_json_dict(self) -> dict:
        return {
            "lr": self.lr,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "loss": None if self.loss is None else self.loss.to_json_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        loss = d.get("loss")
        return cls(
            lr=d.get("lr", 1e-3),
            batch_size=d.get("batch_size", 32),
            max_epochs=d.get("max_epochs", 20),
            patience=d.get("patience", 5),
            loss=None if loss is None else LossConfig.from_json_dict(loss),
            seed=d.get("seed", 0),
        )


@dataclass
class Split:
    """One portion of a fold: per-view matrices plus the shared labels."""

    views: list[np.ndarray]
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        for v in self.views:
            if v.shape[0] != len(self.labels):
                raise ShapeError(
                    f"view rows ({v.shape[0]}) do not match labels ({len(self.labels)})"
                )

    def __len__(self) -> int:
        return len(self.labels)

    def take(self, idx: np.ndarray) -> "Split":
        return Split([v[idx] for v in self.views], self.labels[idx])


@dataclass
class FoldResult:
    """Scores of one train/test fold."""

    fold_index: int
    accuracy: float
    macro_f1: float
    confusion: np.ndarray
    epochs_run: int
    param_count: int

    def to_json_dict(self) -> dict:
        return {
            "fold": self.fold_index,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "epochs_run": self.epochs_run,
            "param_count": self.param_count,
            "confusion": self.confusion.tolist(),
        }


@dataclass
class ExperimentReport:
    """Aggregated fold results for one model/dataset configuration."""

    model: ModelSpec
    train: TrainConfig
    folds: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    mean_macro_f1: float
    std_macro_f1: float

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_json_dict(),
            "train": self.train.to_json_dict(),
            "folds": [f.to_json_dict() for f in self.folds],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_macro_f1": self.mean_macro_f1,
            "std_macro_f1": self.std_macro_f1,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def compute_metrics(
    true_labels: np.ndarray, predicted_labels: np.ndarray, num_classes: int
) -> tuple[float, float, np.ndarray]:
    """Accuracy, macro-averaged F1, and the confusion matrix (rows = true).

    A class with no true and no predicted members contributes F1 = 0 to the
    macro average (deterministic zero-division convention).
    """
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape or true_labels.ndim != 1:
        raise ShapeError(
            f"label arrays must be equal-length vectors, got "
            f"{true_labels.shape} vs {predicted_labels.shape}"
        )
    if true_labels.size == 0:
        raise ConfigError("cannot score an empty prediction set")
    for name, arr in (("true", true_labels), ("predicted", predicted_labels)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ConfigError(f"{name} labels outside [0, {num_classes})")

    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (true_labels, predicted_labels), 1)

    accuracy = float(np.trace(confusion) / confusion.sum())
    f1s = np.zeros(num_classes)
    for c in range(num_classes):
        tp = confusion[c, c]
        predicted = confusion[:, c].sum()
        actual = confusion[c, :].sum()
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        if precision + recall > 0:
            f1s[c] = 2.0 * precision * recall / (precision + recall)
    return accuracy, float(f1s.mean()), confusion


def _batch_loss(model: BuiltModel, views: list[np.ndarray], labels: np.ndarray, loss_cfg: LossConfig | None):
    """Forward one batch and assemble the training objective."""
    result = model.forward(views)
    ce = cross_entropy(result.probs, labels)
    if model.has_alignment_taps and loss_cfg is not None:
        rd = renyi_divergence_loss(result.taps[0], result.taps[1], loss_cfg)
        return joint_loss(ce, rd, loss_cfg.lambda_)
    return ce


def _dataset_ce(model: BuiltModel, split: Split) -> float:
    """Validation cross-entropy in eval mode (classification term only)."""
    model.graph.eval()
    result = model.forward(split.views)
    return float(cross_entropy(result.probs, split.labels).data)


def train_fold(
    model: BuiltModel,
    train: Split,
    val: Split,
    test: Split,
    config: TrainConfig,
    fold_index: int = 0,
) -> FoldResult:
    """Train one fold with early stopping; score the untouched test split.

    Batches are reshuffled each epoch from a stream derived from
    ``(config.seed, fold_index)``; the trailing partial batch is kept. The
    parameters restored at the end always belong to the epoch with the best
    validation cross-entropy seen.
    """
    for split_name, split in (("train", train), ("val", val), ("test", test)):
        if len(split) == 0:
            raise ConfigError(f"{split_name} split is empty")
        if split.labels.max() >= model.spec.num_classes:
            raise ConfigError(
                f"{split_name} split holds label {int(split.labels.max())} but the "
                f"model has {model.spec.num_classes} classes"
            )
        if len(split.views) != model.spec.num_views:
            raise ConfigError(
                f"{split_name} split has {len(split.views)} views, "
                f"model expects {model.spec.num_views}"
            )

    shuffle_rng = np.random.default_rng([config.seed, fold_index, 1])
    optimizer = Adam(model.graph.parameters(), lr=config.lr)

    best_val = np.inf
    best_state = model.graph.state_dict()
    epochs_without_improvement = 0
    epochs_run = 0

    for epoch in range(config.max_epochs):
        epochs_run = epoch + 1
        order = shuffle_rng.permutation(len(train))
        model.graph.train(True)
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            batch = train.take(batch_idx)
            model.graph.zero_grad()
            loss = _batch_loss(model, batch.views, batch.labels, config.loss)
            if not np.isfinite(loss.data):
                raise NumericError(
                    f"training diverged: non-finite loss at epoch {epoch + 1}, "
                    f"batch {start // config.batch_size + 1}"
                )
            loss.backward()
            optimizer.step()

        val_loss = _dataset_ce(model, val)
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.graph.state_dict()
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.patience:
                break

    model.graph.load_state_dict(best_state)
    model.graph.eval()
    predictions = model.predict(test.views)
    accuracy, macro_f1, confusion = compute_metrics(
        test.labels, predictions, model.spec.num_classes
    )
    return FoldResult(
        fold_index=fold_index,
        accuracy=accuracy,
        macro_f1=macro_f1,
        confusion=confusion,
        epochs_run=epochs_run,
        param_count=param_count(model),
    )


def _holdout_split(labels: np.ndarray, indices: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Stratified holdout of ``fraction`` of ``indices`` (at least 1 per class)."""
    held, kept = [], []
    for class_id in np.unique(labels[indices]):
        members = indices[labels[indices] == class_id]
        members = rng.permutation(members)
        n_held = max(1, int(round(fraction * len(members))))
        if n_held >= len(members):  # never empty the training side
            n_held = len(members) - 1
        held.append(members[:n_held])
        kept.append(members[n_held:])
    return np.sort(np.concatenate(kept)), np.sort(np.concatenate(held))


def _check_views_aligned(datasets: Sequence[EmbeddingDataset]) -> None:
    first = datasets[0]
    for other in datasets[1:]:
        if len(other) != len(first):
            raise ConfigError(
                f"views disagree on sample count: {len(first)} vs {len(other)}"
            )
        if other.sample_ids != first.sample_ids or not np.array_equal(other.labels, first.labels):
            raise ConfigError("views must share sample ids and labels row for row")


def run_experiment(
    spec: ModelSpec,
    datasets: Sequence[EmbeddingDataset],
    config: TrainConfig,
    k: int = 5,
    parallel_folds: int = 1,
    on_fold_trained: Callable[[int, BuiltModel], None] | None = None,
) -> ExperimentReport:
    """Run the full k-fold protocol for one model configuration.

    One shared fold plan covers all views. Every fold trains a fresh model
    seeded ``config.seed + fold_index``; within the training portion a
    stratified tenth is held out to drive early stopping, so the test fold
    is never consulted before scoring.
    """
    if len(datasets) != spec.num_views:
        raise ConfigError(
            f"{spec.kind} expects {spec.num_views} dataset view(s), got {len(datasets)}"
        )
    for i, (ds, dim) in enumerate(zip(datasets, spec.input_dims)):
        if ds.dim != dim:
            raise ConfigError(f"view {i} has dim {ds.dim}, spec says {dim}")
    _check_views_aligned(datasets)
    labels = datasets[0].labels
    if labels.max() >= spec.num_classes:
        raise ConfigError(
            f"dataset holds label {int(labels.max())} but the model has "
            f"{spec.num_classes} classes"
        )

    plan = stratified_kfold(datasets[0], k=k, seed=config.seed)
    all_views = [ds.vectors for ds in datasets]

    def run_one(fold: int) -> FoldResult:
        test_idx = plan.test_indices(fold)
        pool_idx = plan.train_indices(fold)
        holdout_rng = np.random.default_rng([config.seed, fold, 2])
        train_idx, val_idx = _holdout_split(labels, pool_idx, 0.1, holdout_rng)
        model = build_model(spec, seed=config.seed + fold)
        result = train_fold(
            model,
            Split([v[train_idx] for v in all_views], labels[train_idx]),
            Split([v[val_idx] for v in all_views], labels[val_idx]),
            Split([v[test_idx] for v in all_views], labels[test_idx]),
            config,
            fold_index=fold,
        )
        if on_fold_trained is not None:
            on_fold_trained(fold, model)
        return result

    if parallel_folds > 1:
        with ThreadPoolExecutor(max_workers=parallel_folds) as pool:
            folds = list(pool.map(run_one, range(k)))
    else:
        folds = [run_one(fold) for fold in range(k)]

    accuracies = np.array([f.accuracy for f in folds])
    f1s = np.array([f.macro_f1 for f in folds])
    return ExperimentReport(
        model=spec,
        train=config,
        folds=folds,
        mean_accuracy=float(accuracies.mean()),
        std_accuracy=float(accuracies.std()),
        mean_macro_f1=float(f1s.mean()),
        std_macro_f1=float(f1s.std()),
    )
