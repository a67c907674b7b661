from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import kendalltau, pearsonr

from attribution.types import SaliencyMap
from common.errors import ConfigurationError, DimensionError
from framing.types import PaddedFrame


def _pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(a, dtype=np.float64).reshape(-1)
    y = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"ranking vectors differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise DimensionError("rank correlation needs at least 2 values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DimensionError("ranking vectors must be finite")
    # fixed argument order keeps metric(a, b) == metric(b, a) to the last bit
    if tuple(y.tolist()) < tuple(x.tolist()):
        x, y = y, x
    return x, y


def _constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x[0]))


def _clip(value: float) -> float:
    return float(min(1.0, max(-1.0, value)))


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    """Kendall's tau-b; ``None`` when either side is constant."""
    x, y = _pair(a, b)
    if _constant(x) or _constant(y):
        return None
    tau = kendalltau(x, y, variant="b").statistic
    return None if not math.isfinite(tau) else _clip(tau)


def pearson_rho(a: Sequence[float], b: Sequence[float]) -> Optional[float]:
    x, y = _pair(a, b)
    if _constant(x) or _constant(y):
        return None
    rho = pearsonr(x, y).statistic
    return None if not math.isfinite(rho) else _clip(rho)


def top_k_cells(values: np.ndarray, k: int) -> list[tuple[int, int]]:
    """The ``k`` highest cells; ties go to the earlier cell in feature-major order."""
    values = np.asarray(values, dtype=np.float64)
    if not 1 <= k <= values.size:
        raise ConfigurationError(f"k must lie in [1, {values.size}], got {k}")
    order = np.argsort(-values.reshape(-1), kind="stable")[:k]
    width = values.shape[1]
    return [(int(i) // width, int(i) % width) for i in order]


def recall_at_k(
    saliency: SaliencyMap | np.ndarray,
    aoi: Iterable[tuple[int, int]],
    k: Optional[int] = None,
) -> float:
    """|top-k cells ∩ aoi| / |aoi|; ``k`` defaults to |aoi|."""
    values = saliency.values if isinstance(saliency, SaliencyMap) else np.asarray(saliency, dtype=np.float64)
    aoi = set(aoi)
    if not aoi:
        raise ConfigurationError("area of interest is empty")
    k = len(aoi) if k is None else int(k)
    hits = sum(1 for cell in top_k_cells(values, k) if cell in aoi)
    return hits / len(aoi)


def time_profile(saliency: SaliencyMap) -> np.ndarray:
    block = saliency.values[:, saliency.time_offset:saliency.time_offset + saliency.d]
    return np.abs(block).mean(axis=0)


def signal_row_share(saliency: SaliencyMap, frame: Optional[PaddedFrame] = None) -> Optional[float]:
    """Share of total |attribution| on the signal row; ``None`` for an all-zero map."""
    row = frame.signal_feature if frame is not None else saliency.signal_feature
    magnitude = np.abs(saliency.values)
    total = float(magnitude.sum())
    if total == 0.0:
        return None
    return float(magnitude[row].sum()) / total


@dataclass(slots=True, frozen=True)
class MetricSummary:
    mean: float
    std: float
    count: int

    def format(self, digits: int = 3) -> str:
        return f"{self.mean:.{digits}f}±{self.std:.{digits}f}"


def summarize(values: Iterable[Optional[float]]) -> Optional[MetricSummary]:
    """Mean and population std over the defined values (two passes)."""
    defined = np.array([v for v in values if v is not None and not _is_nan(v)], dtype=np.float64)
    if defined.size == 0:
        return None
    mean = float(defined.sum() / defined.size)
    std = float(math.sqrt(float(((defined - mean) ** 2).sum()) / defined.size))
    return MetricSummary(mean=mean, std=std, count=int(defined.size))


def _is_nan(value: float) -> bool:
    return isinstance(value, float) and math.isnan(value)
