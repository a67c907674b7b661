from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from common.errors import ConfigurationError


class Arch(str, Enum):
    RECURRENT = "recurrent"
    TEMPORAL_CONV = "temporal_conv"
    ATTENTION = "attention"

    @classmethod
    def parse(cls, value: Any) -> "Arch":
        if isinstance(value, Arch):
            return value
        aliases = {"lstm": "recurrent", "tcn": "temporal_conv", "transformer": "attention"}
        text = str(value).lower()
        try:
            return cls(aliases.get(text, text))
        except ValueError as exc:
            raise ConfigurationError(f"unsupported architecture {value!r}") from exc

    @property
    def display_name(self) -> str:
        return {"recurrent": "LSTM", "temporal_conv": "TCN", "attention": "Transformer"}[self.value]


@dataclass(slots=True)
class ClassifierConfig:
    arch: str = Arch.RECURRENT.value
    hidden_size: int = 32
    num_layers: int = 1
    num_classes: int = 2
    input_features: int = 4
    seq_len: int = 40
    seed: int = 0
    kernel_size: int = 3
    dilations: list[int] = field(default_factory=lambda: [1, 2, 4])
    num_heads: int = 2

    def __post_init__(self) -> None:
        self.arch = Arch.parse(self.arch).value
        if self.hidden_size < 4:
            raise ConfigurationError(f"hidden_size must be >= 4, got {self.hidden_size}")
        if self.num_layers < 1:
            raise ConfigurationError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.num_classes < 2:
            raise ConfigurationError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.input_features < 1 or self.seq_len < 1:
            raise ConfigurationError("input_features and seq_len must be positive")
        if self.kernel_size < 1 or not self.dilations or min(self.dilations) < 1:
            raise ConfigurationError("temporal conv needs kernel_size >= 1 and positive dilations")
        if self.num_heads < 1 or self.hidden_size % self.num_heads:
            raise ConfigurationError(
                f"hidden_size {self.hidden_size} must be divisible by num_heads {self.num_heads}"
            )
        self.dilations = [int(d) for d in self.dilations]

    @classmethod
    def from_dict(cls, data: dict) -> "ClassifierConfig":
        return cls(**data)


@dataclass(slots=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    early_stop_patience: int = 10

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigurationError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0:
            raise ConfigurationError("Adam needs 0 <= beta1, beta2 < 1 and eps > 0")
        if self.early_stop_patience < 1:
            raise ConfigurationError("early_stop_patience must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)
