from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np

from common.errors import ConfigurationError, DimensionError, NumericError
from framing.types import PaddedFrame, Placement


class ExplainerKind(str, Enum):
    FEATURE_PERMUTATION = "fp"
    FEATURE_ABLATION = "fa"
    INTEGRATED_GRADIENTS = "ig"

    @classmethod
    def parse(cls, value: Any) -> "ExplainerKind":
        if isinstance(value, ExplainerKind):
            return value
        aliases = {
            "feature_permutation": "fp",
            "feature_ablation": "fa",
            "integrated_gradients": "ig",
        }
        text = str(value).lower().replace("-", "_")
        try:
            return cls(aliases.get(text, text))
        except ValueError as exc:
            raise ConfigurationError(f"unknown explainer {value!r}") from exc

    @property
    def display_name(self) -> str:
        return self.value.upper()


class Granularity(str, Enum):
    PER_CELL = "per_cell"
    PER_FEATURE_ROW = "per_feature_row"


IG_BASELINES = ("zeros", "dataset-mean")
FA_BASELINES = ("zeros", "noise-resample")
SCORES = ("logit", "probability")
TARGETS = ("predicted", "label")


@dataclass(slots=True)
class AttributionConfig:
    ig_steps: int = 50
    ig_baseline: str = "zeros"
    fa_baseline: str = "zeros"
    fp_repetitions: int = 10
    granularity: str = Granularity.PER_CELL.value
    score: str = "logit"
    target: str = "predicted"

    def __post_init__(self) -> None:
        if self.ig_steps < 2:
            raise ConfigurationError(f"ig_steps must be >= 2, got {self.ig_steps}")
        if self.ig_baseline not in IG_BASELINES:
            raise ConfigurationError(f"ig_baseline must be one of {IG_BASELINES}, got {self.ig_baseline!r}")
        if self.fa_baseline not in FA_BASELINES:
            raise ConfigurationError(f"fa_baseline must be one of {FA_BASELINES}, got {self.fa_baseline!r}")
        if self.fp_repetitions < 1:
            raise ConfigurationError(f"fp_repetitions must be >= 1, got {self.fp_repetitions}")
        try:
            self.granularity = Granularity(self.granularity).value
        except ValueError as exc:
            raise ConfigurationError(f"unknown granularity {self.granularity!r}") from exc
        if self.score not in SCORES:
            raise ConfigurationError(f"score must be one of {SCORES}, got {self.score!r}")
        if self.target not in TARGETS:
            raise ConfigurationError(f"target must be one of {TARGETS}, got {self.target!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "AttributionConfig":
        return cls(**data)


@dataclass(slots=True, eq=False)
class SaliencyMap:
    """Importance per frame cell; ``values[n, t]`` scores frame cell ``(n, t)``."""

    values: np.ndarray
    explainer: str
    target_class: int
    window_id: str = ""
    placement: Placement = Placement.MIDDLE
    signal_feature: int = 0
    time_offset: int = 0
    d: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DimensionError(f"saliency map must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise NumericError(f"{self.explainer} map for {self.window_id or 'frame'} has non-finite values")
        self.placement = Placement.parse(self.placement)

    @classmethod
    def for_frame(
        cls,
        values: np.ndarray,
        frame: PaddedFrame,
        explainer: str,
        target_class: int,
        seed: int = 0,
    ) -> "SaliencyMap":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != frame.shape:
            raise DimensionError(f"map shape {values.shape} does not match frame shape {frame.shape}")
        return cls(
            values=values,
            explainer=explainer,
            target_class=int(target_class),
            window_id=frame.source_window_id,
            placement=frame.placement,
            signal_feature=frame.signal_feature,
            time_offset=frame.time_offset,
            d=frame.d,
            seed=int(seed),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def aoi_cells(self) -> list[tuple[int, int]]:
        return [(self.signal_feature, self.time_offset + k) for k in range(self.d)]

    def aoi_values(self) -> np.ndarray:
        return self.values[self.signal_feature, self.time_offset:self.time_offset + self.d].copy()

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)
