"""Multi-modal heterogeneous ensembles for binary classification.

Builds, evaluates, selects, and interprets late-fusion ensembles over
datasets with several feature matrices describing the same samples.  Base
predictors are trained per modality, their out-of-fold scores are fused by
ensemble methods under nested cross-validation, and a permutation-based
interpreter ranks the contribution of every input feature.
"""

from .archive import ArchiveError, load_model, save_model
from .data import (
    FoldAssignment,
    ManifestError,
    ModalityMatrix,
    ModalitySynthSpec,
    MultiModalDataset,
    SyntheticSpec,
    Violation,
    generate_synthetic,
    load_feature_set,
    load_manifest,
    stratified_k_fold,
    validate_dataset,
    write_manifest,
)
from .engine import CvConfig, EnsemblePipeline, FoldData, derive_seed
from .ensembles import (
    EnsembleModel,
    EnsembleSpec,
    aggregate_mean,
    aggregate_median,
    apply_ensemble,
    default_ensembles,
    train_greedy,
    train_stacker,
)
from .interpret import (
    ImportanceVector,
    ensemble_model_importance,
    interpret,
    permutation_importance,
)
from .learners import (
    FittedBaseModel,
    LearnerSpec,
    TrainingError,
    default_learners,
    fit_learner,
    logistic_loss_gradient,
    predict_proba,
)
from .metrics import build_summary, fmax, roc_auc

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "CvConfig",
    "EnsembleModel",
    "EnsemblePipeline",
    "EnsembleSpec",
    "FittedBaseModel",
    "FoldAssignment",
    "FoldData",
    "ImportanceVector",
    "LearnerSpec",
    "ManifestError",
    "ModalityMatrix",
    "ModalitySynthSpec",
    "MultiModalDataset",
    "SyntheticSpec",
    "TrainingError",
    "Violation",
    "aggregate_mean",
    "aggregate_median",
    "apply_ensemble",
    "build_summary",
    "default_ensembles",
    "default_learners",
    "derive_seed",
    "ensemble_model_importance",
    "fit_learner",
    "fmax",
    "generate_synthetic",
    "interpret",
    "load_feature_set",
    "load_manifest",
    "load_model",
    "logistic_loss_gradient",
    "permutation_importance",
    "predict_proba",
    "roc_auc",
    "save_model",
    "stratified_k_fold",
    "train_greedy",
    "train_stacker",
    "validate_dataset",
    "write_manifest",
    "__version__",
]
