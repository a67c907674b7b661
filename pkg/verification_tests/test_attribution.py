from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from attribution import (
    AttributionConfig,
    ExplainerKind,
    SaliencyMap,
    feature_ablation,
    feature_permutation,
    ig_reference,
    integrated_gradients,
    make_explainer,
    read_map,
    render_heatmap,
    write_map,
)
from common.errors import ConfigurationError, CoordinateError, DimensionError, NumericError, ParseError
from conftest import LinearModel, tiny_config
from framing import PaddedFrame, pad_window
from ingest import LabeledWindow
from models import build


def _frame(seed: int, d: int = 6, alpha: int = 3, placement: str = "middle") -> PaddedFrame:
    rng = np.random.default_rng(seed)
    window = LabeledWindow(window_id=f"w{seed:05d}", values=rng.standard_normal(d), label=seed % 2)
    return pad_window(window, alpha, "5/3", placement, signal_feature=1, seed=seed)


def _linear(frame: PaddedFrame, seed: int = 0) -> LinearModel:
    rng = np.random.default_rng(seed)
    return LinearModel(rng.standard_normal((*frame.shape, 2)), rng.standard_normal(2))


def test_ig_on_linear_model_is_weight_times_input() -> None:
    frame = _frame(1)
    model = _linear(frame)
    saliency = integrated_gradients(model, frame, 1, AttributionConfig(ig_steps=16))
    np.testing.assert_allclose(saliency.values, model.weights[:, :, 1] * frame.data, rtol=0, atol=1e-12)
    assert saliency.explainer == "ig"
    assert (saliency.signal_feature, saliency.time_offset, saliency.d) == (1, frame.time_offset, 6)


def test_ig_with_baseline() -> None:
    frame = _frame(2)
    model = _linear(frame, seed=1)
    baseline = np.full(frame.shape, 0.25)
    saliency = integrated_gradients(model, frame, 0, AttributionConfig(), baseline=baseline)
    np.testing.assert_allclose(saliency.values, model.weights[:, :, 0] * (frame.data - 0.25), atol=1e-12)
    same = integrated_gradients(model, frame, 0, AttributionConfig(), baseline=frame.data.copy())
    np.testing.assert_array_equal(same.values, np.zeros(frame.shape))


def test_ig_completeness_gap_shrinks_with_steps() -> None:
    model = build(tiny_config("recurrent", input_features=3, seq_len=10, seed=5))
    frame = _frame(3, d=6)
    f_x = model.logits(frame.data)[0, 1]
    f_b = model.logits(np.zeros(frame.shape))[0, 1]
    gaps = []
    for steps in (8, 64, 512):
        values = integrated_gradients(model, frame, 1, AttributionConfig(ig_steps=steps)).values
        gaps.append(abs(values.sum() - (f_x - f_b)))
    assert gaps[0] > gaps[1] > gaps[2]


@pytest.mark.slow
@pytest.mark.parametrize("arch", ["recurrent", "temporal_conv", "attention"])
def test_ig_completeness_on_trained_model(arch: str, default_trained) -> None:
    model = default_trained.models[arch]
    frames = default_trained.test_frames[:30]
    logits = model.logits(np.stack([f.data for f in frames]))
    targets = np.argmax(logits, axis=1)
    at_zero = model.logits(np.zeros(frames[0].shape))[0]
    spans = logits[np.arange(len(frames)), targets] - at_zero[targets]
    pick = int(np.argmax(np.abs(spans)))
    values = integrated_gradients(model, frames[pick], int(targets[pick]), AttributionConfig(ig_steps=5000)).values
    assert abs(values.sum() - spans[pick]) / abs(spans[pick]) < 1e-3


def test_ig_rejects_bad_inputs(tiny_models) -> None:
    frame = _frame(4)
    model = _linear(frame)
    with pytest.raises(IndexError):
        integrated_gradients(model, frame, 2, AttributionConfig())
    with pytest.raises(ConfigurationError):
        integrated_gradients(model, frame, 0, AttributionConfig(ig_baseline="dataset-mean"))
    with pytest.raises(DimensionError):
        integrated_gradients(tiny_models["attention"], frame, 0, AttributionConfig())


def test_dataset_mean_reference() -> None:
    frames = [_frame(5), _frame(6)]
    reference = ig_reference(frames, AttributionConfig(ig_baseline="dataset-mean"))
    np.testing.assert_allclose(reference, (frames[0].data + frames[1].data) / 2)
    assert ig_reference(frames, AttributionConfig()) is None


def test_feature_ablation_per_cell_linear() -> None:
    frame = _frame(7)
    model = _linear(frame, seed=2)
    saliency = feature_ablation(model, frame, 0, AttributionConfig())
    np.testing.assert_allclose(saliency.values, model.weights[:, :, 0] * frame.data, atol=1e-12)


def test_feature_ablation_per_row_sums_to_row_drop() -> None:
    frame = _frame(8)
    model = _linear(frame, seed=3)
    saliency = feature_ablation(model, frame, 1, AttributionConfig(granularity="per_feature_row"))
    expected = (model.weights[:, :, 1] * frame.data).sum(axis=1)
    np.testing.assert_allclose(saliency.row_sums(), expected, atol=1e-12)
    assert np.all(saliency.values == saliency.values[:, :1])


def test_feature_ablation_noise_fill_is_seeded() -> None:
    frame = _frame(9)
    model = _linear(frame)
    cfg = AttributionConfig(fa_baseline="noise-resample")
    a = feature_ablation(model, frame, 0, cfg, rng=np.random.default_rng(4))
    b = feature_ablation(model, frame, 0, cfg, rng=np.random.default_rng(4))
    np.testing.assert_array_equal(a.values, b.values)


def test_feature_ablation_noise_fill_differs_from_padding() -> None:
    frames = [_frame(s) for s in (12, 13)]
    model = _linear(frames[0], seed=4)
    explain = make_explainer("fa", AttributionConfig(fa_baseline="noise-resample"))
    for frame, saliency in zip(frames, explain(model, frames)):
        padding = np.ones(frame.shape, dtype=bool)
        padding[frame.signal_feature, frame.time_offset:frame.time_offset + frame.d] = False
        assert np.max(np.abs(saliency.values[padding])) > 1e-3
    rerun = explain(model, frames)
    np.testing.assert_array_equal(rerun[1].values, explain(model, frames)[1].values)


def test_failing_window_is_named() -> None:
    good = _frame(21)
    broken = pad_window(
        LabeledWindow(window_id="w-broken", values=np.r_[np.ones(5), np.nan], label=0),
        3, "5/3", "middle", signal_feature=1, seed=22,
    )
    explain = make_explainer("ig", AttributionConfig(ig_steps=4))
    with pytest.raises(NumericError) as info:
        explain(_linear(good), [good, broken])
    assert info.value.window_id == "w-broken"
    wrapped = CoordinateError(info.value, "synthetic", "LSTM", "IG")
    assert "window=w-broken" in str(wrapped)
    assert wrapped.as_dict()["window_id"] == "w-broken"
    assert wrapped.exit_code == 3


def test_feature_permutation_needs_a_batch() -> None:
    frame = _frame(10)
    with pytest.raises(ConfigurationError):
        feature_permutation(_linear(frame), [frame], 0, AttributionConfig())


def test_feature_permutation_identical_frames_give_zero() -> None:
    frame = _frame(11)
    maps = feature_permutation(_linear(frame), [frame, frame, frame], 0, AttributionConfig(fp_repetitions=3))
    for m in maps:
        np.testing.assert_allclose(m.values, 0.0, atol=1e-12)


def test_feature_permutation_linear_drops_cancel_over_batch() -> None:
    frames = [_frame(s) for s in range(20, 25)]
    model = _linear(frames[0], seed=5)
    maps = feature_permutation(model, frames, 1, AttributionConfig(fp_repetitions=4), seed=3)
    total = sum(m.values for m in maps)
    np.testing.assert_allclose(total, 0.0, atol=1e-10)


def test_feature_permutation_linear_expectation() -> None:
    frames = [_frame(s, d=3, alpha=2) for s in range(30, 34)]
    model = _linear(frames[0], seed=6)
    maps = feature_permutation(model, frames, 0, AttributionConfig(fp_repetitions=20000), seed=1)
    x = np.stack([f.data for f in frames])
    expected = model.weights[None, :, :, 0] * (x - x.mean(axis=0))
    np.testing.assert_allclose(np.stack([m.values for m in maps]), expected, atol=0.15)


def test_feature_permutation_is_seeded() -> None:
    frames = [_frame(s) for s in range(40, 43)]
    model = _linear(frames[0])
    a = feature_permutation(model, frames, 0, AttributionConfig(fp_repetitions=2), seed=9)
    b = feature_permutation(model, frames, 0, AttributionConfig(fp_repetitions=2), seed=9)
    for m, n in zip(a, b):
        np.testing.assert_array_equal(m.values, n.values)
        assert m.seed == 9


def test_make_explainer_targets_predicted_class() -> None:
    frames = [_frame(s) for s in range(50, 54)]
    model = _linear(frames[0], seed=7)
    explain = make_explainer("ig", AttributionConfig(ig_steps=4))
    assert explain.kind is ExplainerKind.INTEGRATED_GRADIENTS
    maps = explain(model, frames)
    predicted = np.argmax(model.logits(np.stack([f.data for f in frames])), axis=1)
    assert [m.target_class for m in maps] == predicted.tolist()
    labelled = make_explainer("fa", AttributionConfig(target="label"))(model, frames)
    assert [m.target_class for m in labelled] == [f.label for f in frames]


def test_saliency_map_validation() -> None:
    with pytest.raises(NumericError):
        SaliencyMap(values=np.array([[0.0, np.nan]]), explainer="ig", target_class=0)
    with pytest.raises(DimensionError):
        SaliencyMap(values=np.zeros(3), explainer="ig", target_class=0)
    with pytest.raises(ConfigurationError):
        AttributionConfig(granularity="per_pixel")


def test_map_file_and_heatmap(tmp_path: Path) -> None:
    frame = _frame(60)
    saliency = integrated_gradients(_linear(frame), frame, 0, AttributionConfig(ig_steps=4))
    loaded = read_map(write_map(saliency, tmp_path / "m.map.csv"))
    np.testing.assert_array_equal(loaded.values, saliency.values)
    assert (loaded.explainer, loaded.window_id, loaded.time_offset) == ("ig", "w00060", frame.time_offset)

    text = render_heatmap(saliency)
    rows = text.splitlines()[1:]
    assert len(rows) == frame.alpha
    assert "[" in rows[1] and "]" in rows[1]
    assert "[" not in rows[0]

    bad = tmp_path / "bad.map.csv"
    bad.write_text("# explainer=ig\n1,2\n3\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_map(bad)
