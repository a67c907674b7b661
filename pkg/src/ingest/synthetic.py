from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from common.errors import ConfigurationError
from ingest.types import Dataset, LabeledWindow

PATTERNS = ("half-bump", "sign-flip")


@dataclass(slots=True)
class SyntheticSpec:
    """Two-class fixture with a known discriminative region.

    ``half-bump``: class 0 carries a positive Gaussian bump in the first half of
    the window, class 1 a negative one in the second half. ``sign-flip``: both
    classes carry the bump in the middle, with opposite signs.
    """

    d: int = 24
    num_windows: int = 200
    pattern: str = "half-bump"
    amplitude: float = 3.0
    width: float = 0.0
    train_fraction: float = 0.7
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self) -> None:
        if self.d < 8:
            raise ConfigurationError(f"synthetic windows need d >= 8, got {self.d}")
        if self.num_windows < 4:
            raise ConfigurationError("synthetic dataset needs at least 4 windows")
        if self.pattern not in PATTERNS:
            raise ConfigurationError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigurationError("train_fraction must be in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        return cls(**data)


def _bump(d: int, center: float, width: float) -> np.ndarray:
    t = np.arange(d, dtype=np.float64)
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def class_patterns(spec: SyntheticSpec) -> np.ndarray:
    d = spec.d
    width = spec.width if spec.width > 0 else max(1.0, d / 12.0)
    if spec.pattern == "half-bump":
        first = _bump(d, (d - 1) / 4.0, width)
        second = _bump(d, 3.0 * (d - 1) / 4.0, width)
        return spec.amplitude * np.stack([first, -second])
    middle = _bump(d, (d - 1) / 2.0, width)
    return spec.amplitude * np.stack([middle, -middle])


def synthesize(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    templates = class_patterns(spec)
    labels = rng.permutation(np.arange(spec.num_windows) % 2)
    noise = rng.standard_normal((spec.num_windows, spec.d))

    windows = [
        LabeledWindow(window_id=f"w{k:05d}", values=templates[label] + noise[k], label=int(label))
        for k, label in enumerate(labels)
    ]
    n_train = int(round(spec.num_windows * spec.train_fraction))
    order = rng.permutation(spec.num_windows)
    train_idx = set(order[:n_train].tolist())
    ids = [w.window_id for w in windows]
    return Dataset(
        name=spec.name,
        windows=windows,
        num_classes=2,
        train_ids=tuple(i for k, i in enumerate(ids) if k in train_idx),
        test_ids=tuple(i for k, i in enumerate(ids) if k not in train_idx),
        label_names=("A", "B"),
    )
