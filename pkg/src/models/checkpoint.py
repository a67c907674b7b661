"""Checkpoint container.

A checkpoint is an ``.npz`` archive with these members:

- ``format_version``: ``saliency-audit-ckpt/1``
- ``config`` / ``train_config`` / ``history``: JSON text
- ``fingerprint``: dataset fingerprint the model was trained on
- ``params``: little-endian float64 vector, parameters in build order
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from common.errors import DataError, DimensionError
from models.classifiers import Classifier, build, expected_parameter_count
from models.config import ClassifierConfig, TrainConfig

FORMAT_VERSION = "saliency-audit-ckpt/1"


@dataclass(slots=True)
class Checkpoint:
    config: ClassifierConfig
    params: np.ndarray
    train_config: TrainConfig = field(default_factory=TrainConfig)
    history: list[dict[str, Any]] = field(default_factory=list)
    fingerprint: str = ""

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype="<f8").reshape(-1)
        expected = expected_parameter_count(self.config)
        if self.params.size != expected:
            raise DimensionError(f"checkpoint holds {self.params.size} parameters, config implies {expected}")

    def restore(self) -> Classifier:
        model = build(self.config)
        model.load_flat_parameters(self.params)
        model.set_trainable(False)
        return model

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history)


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "wb") as f:
        np.savez(
            f,
            format_version=np.array(FORMAT_VERSION),
            config=np.array(json.dumps(asdict(checkpoint.config), sort_keys=True)),
            train_config=np.array(json.dumps(asdict(checkpoint.train_config), sort_keys=True)),
            history=np.array(json.dumps(checkpoint.history)),
            fingerprint=np.array(checkpoint.fingerprint),
            params=checkpoint.params.astype("<f8"),
        )
    return out


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    try:
        archive = np.load(path, allow_pickle=False)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    with archive:
        members = set(archive.files)
        missing = {"format_version", "config", "params"} - members
        if missing:
            raise DataError(f"{path.name}: checkpoint lacks {sorted(missing)}")
        version = str(archive["format_version"])
        if version != FORMAT_VERSION:
            raise DataError(f"{path.name}: unsupported checkpoint format {version!r}")
        config = ClassifierConfig.from_dict(json.loads(str(archive["config"])))
        train_config = (
            TrainConfig.from_dict(json.loads(str(archive["train_config"])))
            if "train_config" in members
            else TrainConfig()
        )
        history = json.loads(str(archive["history"])) if "history" in members else []
        fingerprint = str(archive["fingerprint"]) if "fingerprint" in members else ""
        params = archive["params"].astype("<f8")
    return Checkpoint(
        config=config,
        params=params,
        train_config=train_config,
        history=history,
        fingerprint=fingerprint,
    )
