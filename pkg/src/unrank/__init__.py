"""Corrective unranking for small neural retrieval models.

Train a differentiable relevance scorer, make it forget selected
query-document pairs while installing substitute documents in the vacated
rank positions, and measure forgetting, correction, retention, and
generalisation.
"""

from .baselines import (
    BaselineConfig,
    BaselineMethod,
    amnesiac,
    bad_teacher,
    catastrophic_forgetting,
    neggrad,
    retrain,
)
from .curd import (
    NegativeSample,
    UnlearnConfig,
    UnlearnResult,
    curd_unlearn,
    fc_loss,
    hinge,
    quantile,
    retain_loss,
    sample_negatives,
)
from .data import (
    CorrectedDataset,
    Dataset,
    ForgetSet,
    ForgetSpec,
    RelevanceLabel,
    RetainSet,
    SubstituteMap,
    apply_substitutes,
    build_forget_set,
    load_dataset,
    partition,
)
from .datagen import ForgetProtocol, GenConfig, build_protocol, generate
from .errors import NumericError, UnrankError, ValidationError
from .metrics import (
    MetricsReport,
    RankTable,
    build_report,
    normalised_unlearn_time,
    p_correct,
    p_delta_retain,
    p_forget,
    p_retain,
    p_test,
    rank_documents,
)
from .scorers import (
    PairLoss,
    ScorerKind,
    ScorerParams,
    ShapeMeta,
    TeacherSnapshot,
    grad,
    init_params,
    load_checkpoint,
    save_checkpoint,
    score,
    score_gradient,
    sgd_step,
)
from .training import TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "BaselineMethod",
    "CorrectedDataset",
    "Dataset",
    "ForgetProtocol",
    "ForgetSet",
    "ForgetSpec",
    "GenConfig",
    "MetricsReport",
    "NegativeSample",
    "NumericError",
    "PairLoss",
    "RankTable",
    "RelevanceLabel",
    "RetainSet",
    "ScorerKind",
    "ScorerParams",
    "ShapeMeta",
    "SubstituteMap",
    "TeacherSnapshot",
    "TrainConfig",
    "TrainResult",
    "UnlearnConfig",
    "UnlearnResult",
    "UnrankError",
    "ValidationError",
    "amnesiac",
    "apply_substitutes",
    "bad_teacher",
    "build_forget_set",
    "build_protocol",
    "build_report",
    "catastrophic_forgetting",
    "curd_unlearn",
    "fc_loss",
    "generate",
    "grad",
    "hinge",
    "init_params",
    "load_checkpoint",
    "load_dataset",
    "neggrad",
    "normalised_unlearn_time",
    "p_correct",
    "p_delta_retain",
    "p_forget",
    "p_retain",
    "p_test",
    "partition",
    "quantile",
    "rank_documents",
    "retain_loss",
    "retrain",
    "sample_negatives",
    "save_checkpoint",
    "score",
    "score_gradient",
    "sgd_step",
    "train",
]
