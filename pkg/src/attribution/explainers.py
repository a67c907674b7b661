"""Saliency explainers.

Every explainer scores a frame through ``model.logits`` (pre-softmax by default)
and returns maps aligned cell-for-cell with the frames it was given. Models only
need ``logits(batch) -> (B, C)`` and, for gradients, ``forward(Tensor)``.
"""
from __future__ import annotations

import logging
from contextlib import nullcontext
from typing import Any, Callable, Optional, Protocol, Sequence

import numpy as np

from attribution.types import AttributionConfig, ExplainerKind, Granularity, SaliencyMap
from autodiff import Tensor, input_gradient, softmax_array
from common.errors import ConfigurationError, DimensionError, NumericError, at_window
from common.seeding import derive_seed
from framing.types import PaddedFrame

logger = logging.getLogger(__name__)

CHUNK = 256


class ScoringModel(Protocol):
    def logits(self, frames: np.ndarray) -> np.ndarray: ...

    def forward(self, x: Tensor) -> Tensor: ...


def _scores(model: ScoringModel, batch: np.ndarray, cfg: AttributionConfig) -> np.ndarray:
    parts = [model.logits(batch[s:s + CHUNK]) for s in range(0, batch.shape[0], CHUNK)]
    out = np.concatenate(parts, axis=0)
    return softmax_array(out, axis=1) if cfg.score == "probability" else out


def _check_target(target_class: int, num_classes: int) -> int:
    target = int(target_class)
    if not 0 <= target < num_classes:
        raise IndexError(f"target class {target} out of range for {num_classes} classes")
    return target


def _frame_shape(model: ScoringModel) -> Optional[tuple[int, int]]:
    config = getattr(model, "config", None)
    if config is None:
        return None
    return config.input_features, config.seq_len


def _check_frame(model: ScoringModel, frame: PaddedFrame) -> None:
    expected = _frame_shape(model)
    if expected is not None and frame.shape != expected:
        raise DimensionError(f"frame shape {frame.shape} does not match model input {expected}")


def select_targets(
    model: ScoringModel,
    frames: Sequence[PaddedFrame],
    cfg: AttributionConfig,
) -> list[int]:
    if cfg.target == "label":
        return [int(f.label) for f in frames]
    batch = np.stack([f.data for f in frames])
    return [int(c) for c in np.argmax(model.logits(batch), axis=1)]


def ig_reference(frames: Sequence[PaddedFrame], cfg: AttributionConfig) -> Optional[np.ndarray]:
    """Baseline frame for IG under ``dataset-mean`` (cell-wise mean of ``frames``)."""
    if cfg.ig_baseline != "dataset-mean":
        return None
    if not frames:
        raise ConfigurationError("dataset-mean baseline needs at least one reference frame")
    return np.mean(np.stack([f.data for f in frames]), axis=0)


def integrated_gradients(
    model: ScoringModel,
    frame: PaddedFrame,
    target_class: int,
    cfg: AttributionConfig,
    *,
    baseline: Optional[np.ndarray] = None,
) -> SaliencyMap:
    """(x - b) times the mean gradient at b + (k/K)(x - b), k = 1..K."""
    _check_frame(model, frame)
    steps = cfg.ig_steps
    if steps < 2:
        raise ConfigurationError(f"ig_steps must be >= 2, got {steps}")
    x = frame.data
    if baseline is None:
        if cfg.ig_baseline == "dataset-mean":
            raise ConfigurationError("ig_baseline=dataset-mean needs a reference frame")
        baseline = np.zeros_like(x)
    baseline = np.asarray(baseline, dtype=np.float64)
    if baseline.shape != x.shape:
        raise DimensionError(f"baseline shape {baseline.shape} does not match frame shape {x.shape}")

    delta = x - baseline
    alphas = np.arange(1, steps + 1, dtype=np.float64) / steps
    total = np.zeros_like(x)
    frozen = getattr(model, "frozen", None)
    with frozen() if frozen is not None else nullcontext():
        for s in range(0, steps, CHUNK):
            a = alphas[s:s + CHUNK, None, None]
            path = baseline[None] + a * delta[None]
            grads = input_gradient(model.forward, path, target_class, score=cfg.score)
            total += grads.sum(axis=0)
    values = delta * (total / steps)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"integrated gradients produced non-finite values for {frame.source_window_id}")
    return SaliencyMap.for_frame(values, frame, ExplainerKind.INTEGRATED_GRADIENTS.value, target_class)


def ablation_seed(frame: PaddedFrame) -> int:
    # must not coincide with the padding stream
    return derive_seed(frame.noise_seed, "fa-baseline", frame.source_window_id, frame.placement.value)


def _ablation_fill(
    frame: PaddedFrame,
    cfg: AttributionConfig,
    rng: Optional[np.random.Generator],
) -> np.ndarray:
    if cfg.fa_baseline == "zeros":
        return np.zeros_like(frame.data)
    if rng is None:
        rng = np.random.default_rng(ablation_seed(frame))
    return rng.standard_normal(frame.data.shape)


def feature_ablation(
    model: ScoringModel,
    frame: PaddedFrame,
    target_class: int,
    cfg: AttributionConfig,
    *,
    rng: Optional[np.random.Generator] = None,
) -> SaliencyMap:
    """Score drop when a cell (or a whole feature row) is replaced by the baseline.

    Per-row drops are spread evenly over the row's cells so a row sums to its drop.
    """
    _check_frame(model, frame)
    x = frame.data
    alpha, length = x.shape
    fill = _ablation_fill(frame, cfg, rng)
    reference = _scores(model, x[None], cfg)
    target = _check_target(target_class, reference.shape[1])
    base_score = reference[0, target]

    if cfg.granularity == Granularity.PER_FEATURE_ROW.value:
        batch = np.repeat(x[None], alpha, axis=0)
        for n in range(alpha):
            batch[n, n, :] = fill[n, :]
        drops = base_score - _scores(model, batch, cfg)[:, target]
        values = np.repeat((drops / length)[:, None], length, axis=1)
    else:
        cells = alpha * length
        batch = np.repeat(x[None], cells, axis=0)
        rows, cols = np.divmod(np.arange(cells), length)
        batch[np.arange(cells), rows, cols] = fill[rows, cols]
        drops = base_score - _scores(model, batch, cfg)[:, target]
        values = drops.reshape(alpha, length)
    return SaliencyMap.for_frame(values, frame, ExplainerKind.FEATURE_ABLATION.value, target)


def feature_permutation(
    model: ScoringModel,
    frames: Sequence[PaddedFrame],
    target_classes: Sequence[int] | int,
    cfg: AttributionConfig,
    *,
    seed: int = 0,
) -> list[SaliencyMap]:
    """Mean score drop when a cell's values are shuffled across the batch.

    One uniform permutation is drawn per cell and repetition; frame ``i`` then
    sees the batch's value from frame ``perm[i]`` at that cell only.
    """
    frames = list(frames)
    if len(frames) < 2:
        raise ConfigurationError("feature permutation needs a batch of at least 2 frames")
    for f in frames:
        _check_frame(model, f)
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DimensionError(f"feature permutation batch has differing shapes {sorted(shapes)}")
    x = np.stack([f.data for f in frames])
    batch, alpha, length = x.shape
    targets = [int(target_classes)] * batch if np.isscalar(target_classes) else [int(t) for t in target_classes]
    if len(targets) != batch:
        raise DimensionError(f"{len(targets)} target classes for {batch} frames")

    reference = _scores(model, x, cfg)
    targets = [_check_target(t, reference.shape[1]) for t in targets]
    rows = np.arange(batch)
    base = reference[rows, targets]
    rng = np.random.default_rng(seed)
    per_row = cfg.granularity == Granularity.PER_FEATURE_ROW.value
    units = [(n, None) for n in range(alpha)] if per_row else [(n, t) for n in range(alpha) for t in range(length)]

    totals = np.zeros((len(units), batch))
    for _ in range(cfg.fp_repetitions):
        perturbed = np.repeat(x[None], len(units), axis=0)
        for u, (n, t) in enumerate(units):
            perm = rng.permutation(batch)
            if t is None:
                perturbed[u, :, n, :] = x[perm, n, :]
            else:
                perturbed[u, :, n, t] = x[perm, n, t]
        scores = _scores(model, perturbed.reshape(-1, alpha, length), cfg).reshape(len(units), batch, -1)
        totals += base[None, :] - scores[:, rows, targets]
    means = totals / cfg.fp_repetitions

    maps = []
    for i, frame in enumerate(frames):
        if per_row:
            values = np.repeat((means[:, i] / length)[:, None], length, axis=1)
        else:
            values = means[:, i].reshape(alpha, length)
        with at_window(frame.source_window_id):
            maps.append(SaliencyMap.for_frame(values, frame, ExplainerKind.FEATURE_PERMUTATION.value, targets[i], seed))
    return maps


BatchExplainer = Callable[[Any, Sequence[PaddedFrame]], list[SaliencyMap]]


def make_explainer(
    kind: str | ExplainerKind,
    cfg: AttributionConfig,
    *,
    seed: int | Callable[[Sequence[PaddedFrame]], int] = 0,
    reference: Optional[np.ndarray] = None,
) -> BatchExplainer:
    """Wrap one explainer as ``explain(model, frames) -> maps``, targets chosen per ``cfg``.

    ``seed`` may be a function of the batch so each placement gets its own stream.
    """
    kind = ExplainerKind.parse(kind)

    def explain(model: Any, frames: Sequence[PaddedFrame]) -> list[SaliencyMap]:
        frames = list(frames)
        targets = select_targets(model, frames, cfg)
        logger.debug("explain kind=%s frames=%d", kind.value, len(frames))
        if kind is ExplainerKind.FEATURE_PERMUTATION:
            batch_seed = seed(frames) if callable(seed) else seed
            return feature_permutation(model, frames, targets, cfg, seed=batch_seed)
        maps = []
        for f, t in zip(frames, targets):
            with at_window(f.source_window_id):
                if kind is ExplainerKind.FEATURE_ABLATION:
                    maps.append(feature_ablation(model, f, t, cfg))
                else:
                    maps.append(integrated_gradients(model, f, t, cfg, baseline=reference))
        return maps

    explain.kind = kind  # type: ignore[attr-defined]
    return explain
