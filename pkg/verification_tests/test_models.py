from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from common.errors import ConfigurationError, DataError, DimensionError, DivergenceError
from conftest import tiny_config
from framing import FramingConfig, PaddedFrame, Placement, build_variants, stack_frames
from models import (
    Arch,
    Checkpoint,
    ClassifierConfig,
    TrainConfig,
    accuracy,
    build,
    expected_parameter_count,
    load_checkpoint,
    predict_proba,
    save_checkpoint,
    score_gradient,
    train,
)


def _training_set(dataset, framing: FramingConfig) -> tuple[np.ndarray, np.ndarray]:
    frames: list[PaddedFrame] = []
    for k, window in enumerate(dataset.train()):
        variants = build_variants(window, framing, lambda w, p, k=k: 100 * k + list(Placement).index(p))
        frames.extend(variants.values())
    return stack_frames(frames), np.array([f.label for f in frames])


def test_recurrent_parameter_count() -> None:
    config = ClassifierConfig(arch="lstm", hidden_size=16, input_features=4, num_classes=2, seq_len=40)
    model = build(config)
    assert model.num_parameters == 1442
    assert expected_parameter_count(config) == 1442


@pytest.mark.parametrize("arch", list(Arch))
def test_build_is_deterministic_and_outputs_probabilities(arch: Arch) -> None:
    a = build(tiny_config(arch.value, seed=7))
    b = build(tiny_config(arch.value, seed=7))
    np.testing.assert_array_equal(a.flat_parameters(), b.flat_parameters())
    frame = np.random.default_rng(0).standard_normal((2, 5))
    probs = predict_proba(a, frame)
    assert probs.shape == (2,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(probs >= 0)


def test_arch_aliases_and_unknown() -> None:
    assert Arch.parse("tcn") is Arch.TEMPORAL_CONV
    assert Arch.parse("Transformer").display_name == "Transformer"
    with pytest.raises(ConfigurationError):
        Arch.parse("gru")


def test_config_validation() -> None:
    with pytest.raises(ConfigurationError):
        ClassifierConfig(hidden_size=6, num_heads=4)
    with pytest.raises(ConfigurationError):
        TrainConfig(learning_rate=-1.0)


def test_forward_rejects_wrong_frame_shape(tiny_models) -> None:
    with pytest.raises(DimensionError):
        tiny_models["recurrent"].logits(np.zeros((3, 5)))


@pytest.mark.parametrize("arch", ["recurrent", "temporal_conv", "attention"])
def test_training_lowers_loss(arch: str, synthetic_dataset, small_framing: FramingConfig) -> None:
    x, y = _training_set(synthetic_dataset, small_framing)
    model = build(
        ClassifierConfig(arch=arch, hidden_size=8, input_features=3, seq_len=x.shape[2], seed=1, dilations=[1, 2])
    )
    checkpoint = train(model, x, y, TrainConfig(epochs=5, batch_size=16, learning_rate=1e-2, seed=2))
    losses = [row["loss"] for row in checkpoint.history]
    assert min(losses) < losses[0]
    assert not model.trainable


def test_zero_learning_rate_keeps_parameters(synthetic_dataset, small_framing: FramingConfig) -> None:
    x, y = _training_set(synthetic_dataset, small_framing)
    model = build(ClassifierConfig(arch="recurrent", hidden_size=4, input_features=3, seq_len=x.shape[2]))
    before = model.flat_parameters()
    checkpoint = train(model, x, y, TrainConfig(epochs=2, batch_size=32, learning_rate=0.0))
    np.testing.assert_array_equal(model.flat_parameters(), before)
    np.testing.assert_array_equal(checkpoint.params, before)


def test_training_is_reproducible(synthetic_dataset, small_framing: FramingConfig) -> None:
    x, y = _training_set(synthetic_dataset, small_framing)
    cfg = TrainConfig(epochs=2, batch_size=8, learning_rate=5e-3, seed=4)
    runs = []
    for _ in range(2):
        model = build(ClassifierConfig(arch="temporal_conv", hidden_size=4, input_features=3, seq_len=x.shape[2]))
        runs.append(train(model, x, y, cfg).params)
    np.testing.assert_array_equal(runs[0], runs[1])


def test_divergence_is_reported() -> None:
    model = build(tiny_config("recurrent"))
    x = np.full((4, 2, 5), np.nan)
    with pytest.raises(DivergenceError) as info:
        train(model, x, np.array([0, 1, 0, 1]), TrainConfig(epochs=1))
    assert info.value.epoch == 0


def test_checkpoint_round_trip(tmp_path: Path, tiny_models) -> None:
    model = tiny_models["attention"]
    checkpoint = Checkpoint(
        config=model.config,
        params=model.flat_parameters(),
        history=[{"epoch": 0, "loss": 0.7, "accuracy": 0.5}],
        fingerprint="abc",
    )
    path = save_checkpoint(checkpoint, tmp_path / "m.npz")
    loaded = load_checkpoint(path)
    restored = loaded.restore()
    frame = np.random.default_rng(3).standard_normal((2, 5))
    np.testing.assert_array_equal(predict_proba(restored, frame), predict_proba(model, frame))
    assert loaded.fingerprint == "abc"
    assert list(loaded.history_frame().columns) == ["epoch", "loss", "accuracy"]


def test_checkpoint_rejects_bad_files(tmp_path: Path, tiny_models) -> None:
    junk = tmp_path / "junk.npz"
    junk.write_bytes(b"not an archive")
    with pytest.raises(DataError):
        load_checkpoint(junk)
    model = tiny_models["recurrent"]
    with pytest.raises(DimensionError):
        Checkpoint(config=model.config, params=np.zeros(3))


def test_score_gradient_matches_frame_shape(tiny_models) -> None:
    model = tiny_models["temporal_conv"]
    frame = np.random.default_rng(1).standard_normal((2, 5))
    grad = score_gradient(model, frame, 0, score="probability")
    assert grad.shape == frame.shape
    assert model.trainable
    with pytest.raises(IndexError):
        score_gradient(model, frame, 2)


@pytest.mark.slow
@pytest.mark.parametrize("arch", ["recurrent", "temporal_conv", "attention"])
def test_default_training_separates_synthetic_classes(arch: str, default_trained) -> None:
    model = default_trained.models[arch]
    assert accuracy(model, default_trained.x_test, default_trained.y_test) > 0.9
