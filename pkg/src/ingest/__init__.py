from .preprocess import normalize
from .synthetic import SyntheticSpec, class_patterns, synthesize
from .types import Dataset, LabeledWindow, Normalization
from .ucr import DATASET_PRESETS, parse_ucr, read_canonical, resolve_ucr_paths, write_canonical

__all__ = [
    "DATASET_PRESETS",
    "Dataset",
    "LabeledWindow",
    "Normalization",
    "SyntheticSpec",
    "class_patterns",
    "normalize",
    "parse_ucr",
    "read_canonical",
    "resolve_ucr_paths",
    "synthesize",
    "write_canonical",
]
