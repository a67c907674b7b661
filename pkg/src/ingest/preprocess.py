from __future__ import annotations

import logging

import numpy as np

from common.errors import DegenerateDatasetError, EmptyDatasetError
from ingest.types import Dataset, LabeledWindow, Normalization

logger = logging.getLogger(__name__)


def normalize(dataset: Dataset) -> Dataset:
    """Z-score every window with the mean/std of the train split (population std)."""
    if not dataset.train_ids:
        raise EmptyDatasetError(f"{dataset.name}: train split is empty")
    train = dataset.values(dataset.train_ids)
    mean = float(train.mean())
    std = float(train.std())
    if not np.isfinite(std) or std == 0.0:
        raise DegenerateDatasetError(f"{dataset.name}: train split has zero variance")

    windows = [
        LabeledWindow(window_id=w.window_id, values=(w.values - mean) / std, label=w.label)
        for w in dataset.windows
    ]
    logger.info("normalized dataset=%s mean=%.6g std=%.6g", dataset.name, mean, std)
    return dataset.with_windows(windows, Normalization(mean=mean, std=std))
