from __future__ import annotations

from pathlib import Path
from types import SimpleNamespace
import sys

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from autodiff import Tensor  # noqa: E402
from common.seeding import derive_seed  # noqa: E402
from framing import FramingConfig, build_variants, stack_frames  # noqa: E402
from ingest import SyntheticSpec, normalize, synthesize  # noqa: E402
from models import ClassifierConfig, TrainConfig, build, train  # noqa: E402


class LinearModel:
    """logits = frame.reshape(-1) @ W + b; gradients come from the autodiff engine."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray | None = None) -> None:
        # weights: (alpha, T, C)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.alpha, self.steps, self.num_classes = self.weights.shape
        self.bias = np.zeros(self.num_classes) if bias is None else np.asarray(bias, dtype=np.float64)
        self._w = Tensor(self.weights.reshape(-1, self.num_classes))
        self._b = Tensor(self.bias)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        flat = x.reshape(x.shape[0], self.alpha * self.steps)
        out = flat @ self._w
        return out + self._b.expand(out.shape)

    def logits(self, frames: np.ndarray) -> np.ndarray:
        batch = np.asarray(frames, dtype=np.float64)
        if batch.ndim == 2:
            batch = batch[None]
        return batch.reshape(batch.shape[0], -1) @ self.weights.reshape(-1, self.num_classes) + self.bias


def central_difference(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        up = fn(x)
        x[idx] = orig - step
        down = fn(x)
        x[idx] = orig
        grad[idx] = (up - down) / (2.0 * step)
    return grad


def tiny_config(arch: str, **overrides) -> ClassifierConfig:
    settings = dict(
        arch=arch,
        hidden_size=4,
        num_layers=1,
        num_classes=2,
        input_features=2,
        seq_len=5,
        seed=3,
        kernel_size=2,
        dilations=[1, 2],
        num_heads=2,
    )
    settings.update(overrides)
    return ClassifierConfig(**settings)


@pytest.fixture
def linear_factory():
    return LinearModel


@pytest.fixture
def synthetic_dataset():
    return normalize(synthesize(SyntheticSpec(d=12, num_windows=40, seed=5)))


@pytest.fixture
def small_framing() -> FramingConfig:
    return FramingConfig(alpha=3, beta="5/3", signal_feature=1)


@pytest.fixture
def tiny_models():
    return {arch: build(tiny_config(arch)) for arch in ("recurrent", "temporal_conv", "attention")}


@pytest.fixture(scope="session")
def default_trained():
    """Default-sized models trained on the default synthetic dataset, all three placements."""
    master = 13
    dataset = normalize(synthesize(SyntheticSpec(d=24, num_windows=200, seed=derive_seed(master, "synthetic"))))
    framing = FramingConfig()

    def frames_of(windows):
        frames = []
        for window in windows:
            variants = build_variants(
                window, framing, lambda w, p: derive_seed(master, "noise", w.window_id, p.value)
            )
            frames.extend(variants.values())
        return frames

    train_frames, test_frames = frames_of(dataset.train()), frames_of(dataset.test())
    x_train = stack_frames(train_frames)
    y_train = np.array([f.label for f in train_frames])
    models = {}
    for arch in ("recurrent", "temporal_conv", "attention"):
        model = build(
            ClassifierConfig(
                arch=arch,
                input_features=framing.alpha,
                seq_len=framing.frame_length(dataset.window_length),
                seed=derive_seed(master, "init", arch),
            )
        )
        train(model, x_train, y_train, TrainConfig(seed=derive_seed(master, "batch", arch)))
        models[arch] = model
    return SimpleNamespace(
        models=models,
        test_frames=test_frames,
        x_test=stack_frames(test_frames),
        y_test=np.array([f.label for f in test_frames]),
    )
