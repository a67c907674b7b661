"""Consistency and robustness protocols.

Consistency: one window is padded at the top, middle and bottom of a noise
frame; each variant is explained and the area-of-interest attributions are
compared pairwise, matched by window timestamp.

Robustness: the same window is explained by a model trained on plain frames
and by a twin trained on frames with two feature rows swapped; the signal row
of the plain map is compared with the row it moved to in the swapped map.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Any, Callable, Optional, Sequence

import numpy as np

from attribution.types import SaliencyMap
from common.errors import ConfigurationError, ContractError, at_window
from evaluation.metrics import kendall_tau, pearson_rho, recall_at_k
from evaluation.records import EvaluationRecord
from framing.padding import aoi_cells, build_variants, swap_features
from framing.types import PLACEMENTS, FramingConfig, PaddedFrame, Placement, SwapSpec
from ingest.types import LabeledWindow

logger = logging.getLogger(__name__)

Explainer = Callable[[Any, Sequence[PaddedFrame]], list[SaliencyMap]]
SeedFor = Callable[[LabeledWindow, Placement], int]


@dataclass(slots=True)
class ProtocolConfig:
    k: Optional[int] = None
    max_test_windows: Optional[int] = None
    robustness_placements: list[str] = field(default_factory=lambda: [Placement.MIDDLE.value])
    swap: Any = "random"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.k is not None and self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")
        if self.max_test_windows is not None and self.max_test_windows < 1:
            raise ConfigurationError("max_test_windows must be >= 1 when set")
        if not self.robustness_placements:
            raise ConfigurationError("at least one robustness placement is required")
        self.robustness_placements = [Placement.parse(p).value for p in self.robustness_placements]
        if self.swap != "random":
            if not isinstance(self.swap, (list, tuple)) or len(self.swap) != 2:
                raise ConfigurationError(f"swap must be 'random' or a pair [i, j], got {self.swap!r}")
            SwapSpec(int(self.swap[0]), int(self.swap[1]))
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolConfig":
        return cls(**data)


def explain_frames(
    model: Any,
    frames: Sequence[PaddedFrame],
    explainer: Explainer,
    workers: int = 1,
) -> list[SaliencyMap]:
    """Run ``explainer`` over ``frames``; per-frame explainers may fan out to threads.

    Feature permutation needs the whole batch, so it always runs in one call.
    Output order always matches ``frames``.
    """
    frames = list(frames)
    kind = getattr(explainer, "kind", None)
    batch_coupled = kind is None or getattr(kind, "value", kind) == "fp"
    if workers <= 1 or batch_coupled or len(frames) < 2:
        maps = explainer(model, frames)
    else:
        chunks = [c for c in np.array_split(np.arange(len(frames)), workers) if c.size]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda idx: explainer(model, [frames[i] for i in idx]), chunks))
        maps = [m for part in parts for m in part]
    if len(maps) != len(frames):
        raise ContractError(f"explainer returned {len(maps)} maps for {len(frames)} frames")
    for m, f in zip(maps, frames):
        if m.shape != f.shape:
            error = ContractError(f"map shape {m.shape} does not match frame shape {f.shape}")
            error.window_id = f.source_window_id
            raise error
    return maps


def _ranking(saliency: SaliencyMap, frame: PaddedFrame) -> np.ndarray:
    return np.array([saliency.values[n, t] for n, t in aoi_cells(frame)], dtype=np.float64)


def consistency_eval(
    model: Any,
    windows: Sequence[LabeledWindow],
    explainer: Explainer,
    framing: FramingConfig,
    seed_for: SeedFor,
    *,
    dataset: str,
    model_name: str,
    explainer_name: str,
    k: Optional[int] = None,
    workers: int = 1,
    on_map: Optional[Callable[[SaliencyMap, PaddedFrame], None]] = None,
) -> list[EvaluationRecord]:
    """Records for every placement pair of every window, in window order.

    ``on_map`` sees every map with its frame, e.g. for temporal profiles.
    """
    placements = [p for p in PLACEMENTS if p.value in framing.placements]
    if len(placements) < 2:
        raise ConfigurationError("consistency needs at least two placements")
    frames: dict[Placement, list[PaddedFrame]] = {p: [] for p in placements}
    for window in windows:
        variants = build_variants(window, framing, seed_for, [p.value for p in placements])
        for p in placements:
            frames[p].append(variants[p])
    maps = {p: explain_frames(model, frames[p], explainer, workers) for p in placements}
    if on_map is not None:
        for p in placements:
            for m, f in zip(maps[p], frames[p]):
                on_map(m, f)

    records: list[EvaluationRecord] = []
    for w, window in enumerate(windows):
        with at_window(window.window_id):
            rankings = {p: _ranking(maps[p][w], frames[p][w]) for p in placements}
            recall = {p: recall_at_k(maps[p][w], aoi_cells(frames[p][w]), k) for p in placements}
            for a, b in combinations(placements, 2):
                records.append(
                    EvaluationRecord(
                        dataset=dataset,
                        model=model_name,
                        explainer=explainer_name,
                        window_id=window.window_id,
                        comparison=f"{a.value}-{b.value}",
                        tau=kendall_tau(rankings[a], rankings[b]),
                        rho=pearson_rho(rankings[a], rankings[b]),
                        recall=dict(recall),
                    )
                )
    logger.debug(
        "consistency dataset=%s model=%s explainer=%s windows=%d records=%d",
        dataset, model_name, explainer_name, len(windows), len(records),
    )
    return records


def robustness_eval(
    model_plain: Any,
    model_swapped: Any,
    windows: Sequence[LabeledWindow],
    swap: SwapSpec,
    explainer: Explainer,
    framing: FramingConfig,
    seed_for: SeedFor,
    *,
    dataset: str,
    model_name: str,
    explainer_name: str,
    placements: Sequence[str] = (Placement.MIDDLE.value,),
    k: Optional[int] = None,
    workers: int = 1,
) -> list[EvaluationRecord]:
    if swap.i >= framing.alpha or swap.j >= framing.alpha:
        raise ConfigurationError(f"{swap.label} out of range for alpha={framing.alpha}")
    wanted = [Placement.parse(p) for p in placements]
    records: list[EvaluationRecord] = []
    by_placement: dict[Placement, tuple[list[PaddedFrame], list[SaliencyMap], list[PaddedFrame], list[SaliencyMap]]] = {}
    for p in wanted:
        plain = [build_variants(w, framing, seed_for, [p.value])[p] for w in windows]
        swapped = [swap_features(f, swap) for f in plain]
        by_placement[p] = (
            plain,
            explain_frames(model_plain, plain, explainer, workers),
            swapped,
            explain_frames(model_swapped, swapped, explainer, workers),
        )

    for w, window in enumerate(windows):
        for p in wanted:
            plain, plain_maps, swapped, swapped_maps = by_placement[p]
            with at_window(window.window_id):
                before = _ranking(plain_maps[w], plain[w])
                after = _ranking(swapped_maps[w], swapped[w])
                records.append(
                    EvaluationRecord(
                        dataset=dataset,
                        model=model_name,
                        explainer=explainer_name,
                        window_id=window.window_id,
                        comparison=f"{swap.label}/{p.value}",
                        tau=kendall_tau(before, after),
                        rho=pearson_rho(before, after),
                        recall={p: recall_at_k(swapped_maps[w], aoi_cells(swapped[w]), k)},
                    )
                )
    logger.debug(
        "robustness dataset=%s model=%s explainer=%s %s windows=%d",
        dataset, model_name, explainer_name, swap.label, len(windows),
    )
    return records


def choose_swap(spec: Any, alpha: int, signal_feature: int, rng: np.random.Generator) -> SwapSpec:
    if spec == "random":
        others = [n for n in range(alpha) if n != signal_feature]
        return SwapSpec(signal_feature, int(rng.choice(others)))
    swap = SwapSpec(int(spec[0]), int(spec[1]))
    if max(swap.i, swap.j) >= alpha:
        raise ConfigurationError(f"{swap.label} out of range for alpha={alpha}")
    return swap
