from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from common.errors import DataError

MIN_WINDOW_LENGTH = 3


@dataclass(slots=True, frozen=True, eq=False)
class LabeledWindow:
    window_id: str
    values: np.ndarray
    label: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def length(self) -> int:
        return int(self.values.shape[0])


@dataclass(slots=True, frozen=True)
class Normalization:
    mean: float
    std: float


@dataclass(slots=True)
class Dataset:
    name: str
    windows: list[LabeledWindow]
    num_classes: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    label_names: tuple[str, ...] = ()
    normalization: Optional[Normalization] = None
    _index: dict[str, LabeledWindow] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {w.window_id: w for w in self.windows}
        if len(self._index) != len(self.windows):
            raise DataError(f"{self.name}: duplicate window ids")
        lengths = {w.length for w in self.windows}
        if len(lengths) > 1:
            raise DataError(f"{self.name}: windows have differing lengths {sorted(lengths)}")
        if lengths and lengths.pop() < MIN_WINDOW_LENGTH:
            raise DataError(f"{self.name}: window length must be at least {MIN_WINDOW_LENGTH}")
        for w in self.windows:
            if not 0 <= w.label < self.num_classes:
                raise DataError(f"{self.name}: window {w.window_id} label {w.label} >= {self.num_classes}")
        train, test = set(self.train_ids), set(self.test_ids)
        if train & test:
            raise DataError(f"{self.name}: train and test splits overlap")
        if (train | test) != set(self._index):
            raise DataError(f"{self.name}: split does not cover every window exactly once")
        if not self.label_names:
            self.label_names = tuple(str(i) for i in range(self.num_classes))

    @property
    def window_length(self) -> int:
        return self.windows[0].length if self.windows else 0

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self) -> Iterator[LabeledWindow]:
        return iter(self.windows)

    def window(self, window_id: str) -> LabeledWindow:
        return self._index[window_id]

    def train(self) -> list[LabeledWindow]:
        return [self._index[i] for i in self.train_ids]

    def test(self) -> list[LabeledWindow]:
        return [self._index[i] for i in self.test_ids]

    def values(self, ids: Optional[tuple[str, ...]] = None) -> np.ndarray:
        ids = tuple(w.window_id for w in self.windows) if ids is None else ids
        if not ids:
            return np.empty((0, self.window_length))
        return np.stack([self._index[i].values for i in ids])

    def labels(self, ids: Optional[tuple[str, ...]] = None) -> np.ndarray:
        ids = tuple(w.window_id for w in self.windows) if ids is None else ids
        return np.array([self._index[i].label for i in ids], dtype=np.int64)

    def with_windows(self, windows: list[LabeledWindow], normalization: Optional[Normalization]) -> "Dataset":
        return replace(self, windows=windows, normalization=normalization)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(self.name.encode("utf-8"))
        for w in self.windows:
            h.update(w.window_id.encode("utf-8"))
            h.update(int(w.label).to_bytes(4, "little", signed=False))
            h.update(w.values.astype("<f8").tobytes())
        h.update(",".join(self.test_ids).encode("utf-8"))
        return h.hexdigest()
