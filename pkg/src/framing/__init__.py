from .padding import (
    aoi_cells,
    build_variants,
    pad_window,
    placement_offset,
    read_frame,
    stack_frames,
    swap_features,
    write_frame,
)
from .types import PLACEMENTS, FramingConfig, PaddedFrame, Placement, SwapSpec, parse_beta

__all__ = [
    "PLACEMENTS",
    "FramingConfig",
    "PaddedFrame",
    "Placement",
    "SwapSpec",
    "aoi_cells",
    "build_variants",
    "pad_window",
    "parse_beta",
    "placement_offset",
    "read_frame",
    "stack_frames",
    "swap_features",
    "write_frame",
]
