"""Emotion recognition over pooled audio foundation-model embeddings.

The package is a self-contained training/evaluation engine: a small
numpy-backed tensor library with reverse-mode differentiation, the layer
set and losses for single-view and two-view fusion classifiers, a
stratified k-fold protocol, and a CLI tying it together.
"""

from .data import (
    EmbeddingDataset,
    FoldPlan,
    load_dataset,
    read_embeddings,
    save_dataset,
    stratified_kfold,
    synth_generate,
    write_embeddings,
)
from .errors import (
    ConfigError,
    DataError,
    LabelError,
    NumericError,
    NverError,
    ShapeError,
    StratificationError,
)
from .evaluation import (
    ExperimentReport,
    FoldResult,
    Split,
    TrainConfig,
    compute_metrics,
    run_experiment,
    train_fold,
)
from .gradcheck import GradCheckReport, grad_check, standard_suite
from .layers import ConvBlock, Dense, Dropout, Graph, MultiHeadSelfAttention, Parameter
from .losses import (
    LossConfig,
    cross_entropy,
    joint_loss,
    renyi_divergence_from_distributions,
    renyi_divergence_loss,
)
from .models import (
    BuiltModel,
    ModelSpec,
    build_cnn,
    build_concat_fusion,
    build_fcn,
    build_model,
    build_reno,
    load_model,
    param_count,
    save_model,
)
from .optim import Adam
from .tensor import Tensor

__version__ = "0.1.0"
