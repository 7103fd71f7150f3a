"""Classification and alignment objectives.

Three pieces: plain cross-entropy on softmax outputs, the order-``beta``
Renyi divergence between two branches' feature distributions, and the
convex combination that joins them.

The divergence is computed on row-wise softmax images of the raw branch
features (raw conv activations are not distributions), with the additive
``delta`` smoothing applied as-is and no renormalization afterwards. That
keeps the printed formula exact at the cost of a gradient-free constant
offset: the loss of a distribution against itself is
``log(1 + M*delta) / (beta - 1)``, not zero, and that value is also the
global lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, LabelError, ShapeError
from .tensor import Tensor


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters of the joint objective.

    ``beta`` is the divergence order (> 1), ``delta`` the additive
    stabilizer (> 0), and ``lambda_`` the cross-entropy weight in the joint
    loss (within [0, 1]). Defaults are the values reported to work best.
    """

    beta: float = 2.0
    delta: float = 0.2
    lambda_: float = 0.4

    def __post_init__(self):
        if self.beta <= 1.0:
            raise ConfigError(f"divergence order beta must exceed 1, got {self.beta}")
        if self.delta <= 0.0:
            raise ConfigError(f"stabilizer delta must be positive, got {self.delta}")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"trade-off lambda must lie in [0, 1], got {self.lambda_}")

    def to_json_dict(self) -> dict:
        return {"beta": self.beta, "delta": self.delta, "lambda": self.lambda_}

    @classmethod
    def from_json_dict(cls, d: dict) -> "LossConfig":
        return cls(beta=d["beta"], delta=d["delta"], lambda_=d["lambda"])

    def self_divergence(self, m: int) -> float:
        """Value the divergence takes when both distributions coincide."""
        return float(np.log(1.0 + m * self.delta) / (self.beta - 1.0))


def cross_entropy(predictions: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of the true classes.

    ``predictions`` must be ``[batch, classes]`` rows on the probability
    simplex (i.e. softmax outputs); gradients flow back through whatever
    produced them. A small epsilon keeps the log finite on exact zeros.
    """
    if predictions.ndim != 2:
        raise ShapeError(f"predictions must be [batch, classes], got {predictions.shape}")
    labels = np.asarray(labels)
    if labels.shape != (predictions.shape[0],):
        raise ShapeError(
            f"labels shape {labels.shape} does not match batch {predictions.shape[0]}"
        )
    n_classes = predictions.shape[1]
    bad = np.nonzero((labels < 0) | (labels >= n_classes))[0]
    if bad.size:
        raise LabelError(
            f"label {int(labels[bad[0]])} at index {int(bad[0])} "
            f"outside [0, {n_classes})"
        )
    # judge only finite rows; non-finite activations must surface as a
    # non-finite loss so training loops can report divergence in context
    row_sums = predictions.data.sum(axis=-1)
    finite = np.isfinite(row_sums)
    if np.any(np.abs(row_sums[finite] - 1.0) > 1e-5):
        raise ConfigError("prediction rows must sum to 1; pass softmax outputs")
    picked = T.pick(predictions, labels)
    return T.scale(T.mean_all(T.log(T.add_const(picked, 1e-12))), -1.0)


def renyi_divergence_from_distributions(z_x: Tensor, z_y: Tensor, config: LossConfig) -> Tensor:
    """Divergence on already-normalized rows (no softmax applied here).

    Per sample: ``1/(beta-1) * log sum_j (z_x_j + delta)^beta *
    (z_y_j + delta)^(1-beta)``; the batch loss is the mean over samples.
    """
    if z_x.shape != z_y.shape:
        raise ShapeError(
            f"branch feature dimensions differ: {z_x.shape} vs {z_y.shape}"
        )
    smooth_x = T.add_const(z_x, config.delta)
    smooth_y = T.add_const(z_y, config.delta)
    mixture = T.mul(T.power(smooth_x, config.beta), T.power(smooth_y, 1.0 - config.beta))
    per_sample = T.scale(T.log(T.sum_last(mixture)), 1.0 / (config.beta - 1.0))
    return T.mean_all(per_sample)


def renyi_divergence_loss(feat_x: Tensor, feat_y: Tensor, config: LossConfig) -> Tensor:
    """Alignment loss between two branches' raw feature rows ``[batch, M]``.

    Each branch is normalized row-wise by softmax before the divergence;
    both inputs receive gradients.
    """
    if feat_x.shape != feat_y.shape:
        raise ShapeError(
            f"branch feature dimensions differ: {feat_x.shape} vs {feat_y.shape}"
        )
    return renyi_divergence_from_distributions(T.softmax(feat_x), T.softmax(feat_y), config)


def joint_loss(ce: Tensor, rd: Tensor, lambda_: float) -> Tensor:
    """Convex combination ``lambda*ce + (1-lambda)*rd``; gradients split linearly."""
    if not 0.0 <= lambda_ <= 1.0:
        raise ConfigError(f"trade-off lambda must lie in [0, 1], got {lambda_}")
    return T.add(T.scale(ce, lambda_), T.scale(rd, 1.0 - lambda_))
