from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np

from common.errors import ConfigurationError


class Placement(str, Enum):
    TOP = "top"
    MIDDLE = "middle"
    BOTTOM = "bottom"

    @classmethod
    def parse(cls, value: Any) -> "Placement":
        if isinstance(value, Placement):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise ConfigurationError(f"unknown placement {value!r}") from exc


PLACEMENTS = (Placement.TOP, Placement.MIDDLE, Placement.BOTTOM)


def parse_beta(value: Any) -> Fraction:
    """Accept ``5/3``, ``"5/3"`` or ``1.6667``; returned as an exact fraction."""
    try:
        beta = Fraction(str(value)).limit_denominator(10**6)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"cannot parse beta={value!r}") from exc
    return beta


@dataclass(slots=True)
class FramingConfig:
    alpha: int = 4
    beta: Any = "5/3"
    signal_feature: int = 1
    placements: list[str] = field(default_factory=lambda: [p.value for p in PLACEMENTS])

    def __post_init__(self) -> None:
        # Source windows are univariate, so alpha only has to exceed one feature.
        if self.alpha <= 1:
            raise ConfigurationError(f"alpha must exceed the source feature count (1), got {self.alpha}")
        beta = parse_beta(self.beta)
        if not 1 < beta < 3:
            raise ConfigurationError(f"beta must lie in (1, 3), got {self.beta}")
        if not 0 <= self.signal_feature < self.alpha:
            raise ConfigurationError(f"signal_feature {self.signal_feature} outside [0, {self.alpha})")
        if not self.placements:
            raise ConfigurationError("at least one placement is required")
        self.placements = [Placement.parse(p).value for p in self.placements]

    @property
    def beta_fraction(self) -> Fraction:
        return parse_beta(self.beta)

    def frame_length(self, d: int) -> int:
        return int(self.beta_fraction * d)

    @classmethod
    def from_dict(cls, data: dict) -> "FramingConfig":
        return cls(**data)


@dataclass(slots=True, frozen=True)
class SwapSpec:
    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ConfigurationError(f"swap needs two distinct feature rows, got i=j={self.i}")
        if self.i < 0 or self.j < 0:
            raise ConfigurationError("swap indices must be non-negative")

    @property
    def label(self) -> str:
        return f"swap-{self.i}-{self.j}"

    def maps(self, row: int) -> int:
        if row == self.i:
            return self.j
        if row == self.j:
            return self.i
        return row


@dataclass(slots=True, eq=False)
class PaddedFrame:
    data: np.ndarray
    placement: Placement
    signal_feature: int
    time_offset: int
    d: int
    noise_seed: int
    source_window_id: str
    label: int = -1

    @property
    def alpha(self) -> int:
        return int(self.data.shape[0])

    @property
    def length(self) -> int:
        return int(self.data.shape[1])

    @property
    def shape(self) -> tuple[int, int]:
        return self.alpha, self.length

    def window_values(self) -> np.ndarray:
        return self.data[self.signal_feature, self.time_offset:self.time_offset + self.d].copy()
