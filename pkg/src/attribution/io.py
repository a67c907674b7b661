from __future__ import annotations

from pathlib import Path

import numpy as np

from attribution.types import SaliencyMap
from common.errors import DataError, ParseError

GLYPHS = " .:-=+*#%@"


def write_map(saliency: SaliencyMap, path: str | Path) -> Path:
    """Rows are features, columns are time; 17 significant digits per value."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta = (
        f"# explainer={saliency.explainer} target={saliency.target_class} "
        f"window_id={saliency.window_id} placement={saliency.placement.value} "
        f"signal_feature={saliency.signal_feature} time_offset={saliency.time_offset} "
        f"d={saliency.d} seed={saliency.seed}"
    )
    rows = [",".join(format(float(v), ".17g") for v in row) for row in saliency.values]
    out.write_text("\n".join([meta, *rows]) + "\n", encoding="utf-8")
    return out


def read_map(path: str | Path) -> SaliencyMap:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].startswith("#"):
        raise ParseError(f"{path.name}: missing '#' metadata line", line=1)
    meta: dict[str, str] = {}
    for token in lines[0].lstrip("#").split():
        if "=" not in token:
            raise ParseError(f"{path.name}: malformed metadata token {token!r}", line=1)
        key, value = token.split("=", 1)
        meta[key] = value
    rows = []
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path.name}: {exc}", line=line_no) from exc
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{path.name}: ragged map row", line=line_no)
    if not rows:
        raise ParseError(f"{path.name}: map has no rows", line=2)
    try:
        return SaliencyMap(
            values=np.array(rows, dtype=np.float64),
            explainer=meta.get("explainer", ""),
            target_class=int(meta.get("target", -1)),
            window_id=meta.get("window_id", ""),
            placement=meta.get("placement", "middle"),
            signal_feature=int(meta.get("signal_feature", 0)),
            time_offset=int(meta.get("time_offset", 0)),
            d=int(meta.get("d", 0)),
            seed=int(meta.get("seed", 0)),
        )
    except ValueError as exc:
        raise ParseError(f"{path.name}: bad metadata ({exc})", line=1) from exc


def render_heatmap(saliency: SaliencyMap, glyphs: str = GLYPHS) -> str:
    """Quantize |value| / max|value| onto a glyph ramp; the area of interest is bracketed."""
    magnitude = np.abs(saliency.values)
    peak = float(magnitude.max())
    levels = len(glyphs) - 1
    scaled = np.zeros_like(magnitude, dtype=int) if peak == 0.0 else np.rint(magnitude / peak * levels).astype(int)
    lines = [
        f"{saliency.explainer} target={saliency.target_class} window={saliency.window_id} "
        f"placement={saliency.placement.value} max|s|={peak:.3g}  (rows=features, columns=time)"
    ]
    start, stop = saliency.time_offset, saliency.time_offset + saliency.d
    for n, row in enumerate(scaled):
        cells = "".join(glyphs[v] for v in row)
        if n == saliency.signal_feature and saliency.d:
            cells = cells[:start] + "[" + cells[start:stop] + "]" + cells[stop:]
        else:
            cells = cells[:start] + " " + cells[start:stop] + " " + cells[stop:] if saliency.d else cells
        lines.append(f"f{n:<2d}|{cells}|")
    return "\n".join(lines)
