from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Optional

from attribution.types import AttributionConfig, ExplainerKind
from common.errors import ConfigurationError
from evaluation.protocols import ProtocolConfig
from framing.types import FramingConfig
from ingest.ucr import DELIMITERS
from models.config import Arch, TrainConfig

SOURCES = ("synthetic", "ucr", "canonical")
PROTOCOLS = ("consistency", "robustness")


@dataclass(slots=True)
class DatasetSpec:
    """Where one dataset comes from.

    ``ucr``: ``path`` (+ optional ``test_path``) or an archive ``root`` plus ``name``.
    ``canonical``: a file written by ``ingest``. ``synthetic``: ``synthetic`` holds
    the generator settings.
    """

    name: str = "synthetic"
    source: str = "synthetic"
    path: Optional[str] = None
    test_path: Optional[str] = None
    root: Optional[str] = None
    delimiter: Optional[str] = None
    train_fraction: float = 0.7
    normalize: bool = True
    synthetic: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise ConfigurationError(f"dataset source must be one of {SOURCES}, got {self.source!r}")
        if self.delimiter is not None and self.delimiter not in DELIMITERS:
            raise ConfigurationError(f"delimiter must be one of {sorted(DELIMITERS)}, got {self.delimiter!r}")
        if self.source == "canonical" and not self.path:
            raise ConfigurationError(f"dataset {self.name}: canonical source needs a path")
        if self.source == "ucr" and not (self.path or self.root):
            raise ConfigurationError(f"dataset {self.name}: ucr source needs a path or an archive root")

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        return cls(**data)


@dataclass(slots=True)
class ModelSettings:
    hidden_size: int = 32
    num_layers: int = 1
    kernel_size: int = 3
    dilations: list[int] = field(default_factory=lambda: [1, 2, 4])
    num_heads: int = 2

    @classmethod
    def from_dict(cls, data: dict) -> "ModelSettings":
        return cls(**data)


@dataclass(slots=True)
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "outputs/run"
    datasets: list[DatasetSpec] = field(default_factory=lambda: [DatasetSpec()])
    models: list[str] = field(default_factory=lambda: [a.value for a in Arch])
    explainers: list[str] = field(default_factory=lambda: [e.value for e in ExplainerKind])
    protocols: list[str] = field(default_factory=lambda: list(PROTOCOLS))
    framing: FramingConfig = field(default_factory=FramingConfig)
    model: ModelSettings = field(default_factory=ModelSettings)
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluation: ProtocolConfig = field(default_factory=ProtocolConfig)

    def __post_init__(self) -> None:
        if int(self.seed) < 0:
            raise ConfigurationError(f"master seed must be non-negative, got {self.seed}")
        self.seed = int(self.seed)
        if not self.datasets:
            raise ConfigurationError("at least one dataset is required")
        if not self.models:
            raise ConfigurationError("at least one model is required")
        if not self.explainers:
            raise ConfigurationError("at least one explainer is required")
        self.models = [Arch.parse(m).value for m in self.models]
        self.explainers = [ExplainerKind.parse(e).value for e in self.explainers]
        unknown = [p for p in self.protocols if p not in PROTOCOLS]
        if unknown or not self.protocols:
            raise ConfigurationError(f"protocols must be a non-empty subset of {PROTOCOLS}, got {self.protocols}")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"dataset names must be unique, got {names}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        nested = {"framing", "model", "attribution", "train", "evaluation", "datasets", "dataset"}
        try:
            datasets_raw = data.get("datasets")
            if datasets_raw is None:
                datasets_raw = [data["dataset"]] if "dataset" in data else [{}]
            kwargs = {k: v for k, v in data.items() if k not in nested}
            return cls(
                datasets=[DatasetSpec.from_dict(d or {}) for d in datasets_raw],
                framing=FramingConfig.from_dict(data.get("framing") or {}),
                model=ModelSettings.from_dict(data.get("model") or {}),
                attribution=AttributionConfig.from_dict(data.get("attribution") or {}),
                train=TrainConfig.from_dict(data.get("train") or {}),
                evaluation=ProtocolConfig.from_dict(data.get("evaluation") or {}),
                **kwargs,
            )
        except TypeError as exc:
            raise ConfigurationError(f"unknown or missing config key: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["framing"]["beta"] = str(self.framing.beta_fraction)
        return data
