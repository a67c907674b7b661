from .explainers import (
    BatchExplainer,
    feature_ablation,
    feature_permutation,
    ig_reference,
    integrated_gradients,
    make_explainer,
    select_targets,
)
from .io import GLYPHS, read_map, render_heatmap, write_map
from .types import AttributionConfig, ExplainerKind, Granularity, SaliencyMap

__all__ = [
    "GLYPHS",
    "AttributionConfig",
    "BatchExplainer",
    "ExplainerKind",
    "Granularity",
    "SaliencyMap",
    "feature_ablation",
    "feature_permutation",
    "ig_reference",
    "integrated_gradients",
    "make_explainer",
    "read_map",
    "render_heatmap",
    "select_targets",
    "write_map",
]
