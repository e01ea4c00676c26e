"""Multi-model, multi-fold probability-fusion ensembles for 8-class expression recognition."""

from .core import (
    CLASS_NAMES,
    NUM_CLASSES,
    Dataset,
    ExpressionClass,
    InvariantError,
    LabeledSample,
    PredictionMatrix,
    ValidationError,
    argmax_label,
    validate_prediction_matrix,
)
from .focal import FocalLossParams, focal_loss, focal_loss_batch, focal_loss_grad, softmax
from .folds import FoldPlan, fold_view, split_five_fold
from .fusion import (
    FusionPreset,
    FusionWeights,
    WeightGrid,
    fuse_across_folds,
    fuse_within_fold,
    get_preset,
    list_presets,
    search_weights,
)
from .metrics import EvalReport, confusion, evaluate, f1_per_class, macro_f1
from .pipeline import PipelineError, PipelineResult, RunConfig, run_pipeline
from .synthetic import SyntheticSpec, generate_synthetic, write_synthetic
from .trainer import AdamState, LinearSoftmaxModel, TrainConfig, adam_step, cosine_lr, predict, train

__version__ = "0.1.0"
