from .checkpoint import FORMAT_VERSION, Checkpoint, load_checkpoint, save_checkpoint
from .classifiers import (
    AttentionClassifier,
    Classifier,
    RecurrentClassifier,
    TemporalConvClassifier,
    build,
    expected_parameter_count,
)
from .config import Arch, ClassifierConfig, TrainConfig
from .training import Adam, accuracy, evaluate, predict, predict_proba, score_gradient, train

__all__ = [
    "FORMAT_VERSION",
    "Adam",
    "Arch",
    "AttentionClassifier",
    "Checkpoint",
    "Classifier",
    "ClassifierConfig",
    "RecurrentClassifier",
    "TemporalConvClassifier",
    "TrainConfig",
    "accuracy",
    "build",
    "evaluate",
    "expected_parameter_count",
    "load_checkpoint",
    "predict",
    "predict_proba",
    "save_checkpoint",
    "score_gradient",
    "train",
]
