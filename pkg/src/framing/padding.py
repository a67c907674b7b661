"""Padded frames around a univariate window.

A window of length ``d`` is written into one row of an ``alpha x floor(beta*d)``
matrix of N(0, 1) noise. Placing it at the start, centre or end of the time
axis stands in for three overlapping sliding windows that share its content.
"""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np

from common.errors import ConfigurationError, DimensionError, ParseError
from framing.types import FramingConfig, PaddedFrame, Placement, SwapSpec, parse_beta
from ingest.types import LabeledWindow

logger = logging.getLogger(__name__)


def placement_offset(placement: Placement, length: int, d: int) -> int:
    if placement is Placement.TOP:
        return 0
    if placement is Placement.MIDDLE:
        return (length - d) // 2
    return length - d


def pad_window(
    window: LabeledWindow,
    alpha: int,
    beta: Any,
    placement: Placement | str,
    signal_feature: int = 1,
    seed: int = 0,
) -> PaddedFrame:
    placement = Placement.parse(placement)
    if alpha <= 1:
        raise ConfigurationError(f"alpha must be > 1, got {alpha}")
    beta_frac = parse_beta(beta)
    if not 1 < beta_frac < 3:
        raise ConfigurationError(f"beta must lie in (1, 3), got {beta}")
    if not 0 <= signal_feature < alpha:
        raise ConfigurationError(f"signal_feature {signal_feature} outside [0, {alpha})")

    d = window.length
    length = int(beta_frac * d)
    if length < d + 2:
        raise ConfigurationError(
            f"beta*d = {float(beta_frac * d):.3f} leaves no room for distinct placements of d={d}"
        )
    offset = placement_offset(placement, length, d)

    rng = np.random.default_rng(seed)
    data = rng.standard_normal((alpha, length))
    data[signal_feature, offset:offset + d] = window.values
    return PaddedFrame(
        data=data,
        placement=placement,
        signal_feature=signal_feature,
        time_offset=offset,
        d=d,
        noise_seed=int(seed),
        source_window_id=window.window_id,
        label=window.label,
    )


def build_variants(
    window: LabeledWindow,
    config: FramingConfig,
    seed_for: Callable[[LabeledWindow, Placement], int],
    placements: Iterable[str] | None = None,
) -> dict[Placement, PaddedFrame]:
    wanted = config.placements if placements is None else list(placements)
    frames = {}
    for name in wanted:
        placement = Placement.parse(name)
        frames[placement] = pad_window(
            window,
            alpha=config.alpha,
            beta=config.beta,
            placement=placement,
            signal_feature=config.signal_feature,
            seed=seed_for(window, placement),
        )
    return frames


def swap_features(frame: PaddedFrame, swap: SwapSpec) -> PaddedFrame:
    if swap.i >= frame.alpha or swap.j >= frame.alpha:
        raise ConfigurationError(f"{swap.label} out of range for {frame.alpha} feature rows")
    data = frame.data.copy()
    data[[swap.i, swap.j]] = data[[swap.j, swap.i]]
    return replace(frame, data=data, signal_feature=swap.maps(frame.signal_feature))


def aoi_cells(frame: PaddedFrame) -> list[tuple[int, int]]:
    """Area-of-interest cells ordered by the underlying window timestamp."""
    return [(frame.signal_feature, frame.time_offset + k) for k in range(frame.d)]


def stack_frames(frames: list[PaddedFrame]) -> np.ndarray:
    if not frames:
        raise DimensionError("cannot stack an empty list of frames")
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise DimensionError(f"frames have differing shapes {sorted(shapes)}")
    return np.stack([f.data for f in frames])


def write_frame(frame: PaddedFrame, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = (
        f"# placement={frame.placement.value} signal_feature={frame.signal_feature} "
        f"time_offset={frame.time_offset} seed={frame.noise_seed} d={frame.d} "
        f"window_id={frame.source_window_id} label={frame.label}"
    )
    rows = [",".join(format(v, ".17g") for v in row) for row in frame.data]
    out.write_text("\n".join([meta, *rows]) + "\n", encoding="utf-8")
    return out


def read_frame(path: str | Path) -> PaddedFrame:
    path = Path(path)
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ParseError(f"{path.name}: missing '#' metadata line", line=1)
    meta = dict(token.split("=", 1) for token in lines[0].lstrip("#").split())
    try:
        data = np.array([[float(v) for v in line.split(",")] for line in lines[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"{path.name}: {exc}") from exc
    if data.ndim != 2:
        raise ParseError(f"{path.name}: ragged frame rows")
    return PaddedFrame(
        data=data,
        placement=Placement.parse(meta["placement"]),
        signal_feature=int(meta["signal_feature"]),
        time_offset=int(meta["time_offset"]),
        d=int(meta["d"]),
        noise_seed=int(meta["seed"]),
        source_window_id=meta.get("window_id", ""),
        label=int(meta.get("label", -1)),
    )
