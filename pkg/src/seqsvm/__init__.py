"""One-class SVM and SVDD detectors on jointly trained recurrent embeddings."""

from .data import (NormalizationStats, SequenceBatch, SequenceItem, SynthProfile,
                   apply_normalization, denormalize, fit_and_normalize,
                   inject_gaussian_anomalies, load_csv, load_jsonl, save_jsonl,
                   split_train_test, synth_generate)
from .errors import (ConfigError, DataError, DegenerateLabelsError, DivergenceError,
                     InsufficientDataError, NoMarginVectorError, SeqsvmError,
                     StepFailureError, ValidationError)
from .evaluate import (RocCurve, auc, auc_summary, crossval_select, rank_auc,
                       roc_curve, roc_to_csv)
from .kernels import ACTIVE_BACKEND
from .ocsvm import HyperplaneModel, SmoothingConfig
from .rnn import Embedding, RnnParams, embed_batch, embed_sequence, init_params
from .seeding import derive_seed
from .serialize import load_model, model_from_dict, model_to_dict, save_model
from .stiefel import ManifoldPoint, cayley_step, cayley_update, init_orthogonal
from .svdd import SphereModel
from .trainer import (TrainConfig, TrainedDetector, smooth_min, train,
                      train_gradient, train_qp, train_semisupervised_gradient)

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND", "ConfigError", "DataError", "DegenerateLabelsError",
    "DivergenceError", "Embedding", "HyperplaneModel", "InsufficientDataError",
    "ManifoldPoint", "NoMarginVectorError", "NormalizationStats", "RnnParams",
    "RocCurve", "SeqsvmError", "SequenceBatch", "SequenceItem", "SmoothingConfig",
    "SphereModel", "StepFailureError", "SynthProfile", "TrainConfig",
    "TrainedDetector", "ValidationError", "apply_normalization", "auc",
    "auc_summary", "cayley_step", "cayley_update", "crossval_select",
    "denormalize", "derive_seed", "embed_batch", "embed_sequence",
    "fit_and_normalize", "init_orthogonal", "init_params",
    "inject_gaussian_anomalies", "load_csv", "load_jsonl", "load_model",
    "model_from_dict", "model_to_dict", "rank_auc", "roc_curve", "roc_to_csv",
    "save_jsonl", "save_model", "smooth_min", "split_train_test",
    "synth_generate", "train", "train_gradient", "train_qp",
    "train_semisupervised_gradient",
]
