"""Reader and writer for UCR-style univariate classification files.

One window per line: the class label first, then ``d`` observations, separated
by commas (2015 archive) or tabs (2018 archive). Lines starting with ``#`` are
comments; the canonical dataset file uses one as its header.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from common.errors import ConfigurationError, DataError, EmptyDatasetError, ParseError
from ingest.types import Dataset, LabeledWindow, Normalization

logger = logging.getLogger(__name__)

DELIMITERS = {"comma": ",", "tab": "\t"}

# Short names of the univariate datasets the audit was designed around.
# PD is not in the UCR archive and has to be supplied as a local file.
DATASET_PRESETS = {
    "WIN": "Wine",
    "IPD": "ItalyPowerDemand",
    "ECG": "TwoLeadECG",
    "MS": "MoteStrain",
}


def resolve_ucr_paths(root: str | Path, name: str) -> tuple[Path, Path]:
    archive_name = DATASET_PRESETS.get(name, name)
    base = Path(root) / archive_name
    for suffix in (".tsv", ".txt", ""):
        train = base / f"{archive_name}_TRAIN{suffix}"
        test = base / f"{archive_name}_TEST{suffix}"
        if train.exists() and test.exists():
            return train, test
    raise ConfigurationError(f"no TRAIN/TEST files for {archive_name!r} under {base}")


def _detect_delimiter(line: str) -> str:
    return "\t" if "\t" in line else ","


def _canonical_label(raw: str) -> str:
    text = raw.strip()
    try:
        number = float(text)
    except ValueError:
        return text
    if number.is_integer():
        return str(int(number))
    return repr(number)


def _read_rows(path: Path, delimiter: Optional[str]) -> list[tuple[int, str, np.ndarray]]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    rows: list[tuple[int, str, np.ndarray]] = []
    sep: Optional[str] = DELIMITERS[delimiter] if delimiter is not None else None
    width: Optional[int] = None
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if sep is None:
            sep = _detect_delimiter(stripped)
        fields = [f for f in stripped.split(sep)]
        if len(fields) < 2:
            raise ParseError(f"{path.name}: expected a label and values", line=line_no)
        if width is None:
            width = len(fields)
        elif len(fields) != width:
            raise ParseError(f"{path.name}: row has {len(fields) - 1} values, expected {width - 1}", line=line_no)
        try:
            values = np.array([float(f) for f in fields[1:]], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"{path.name}: non-numeric field ({exc})", line=line_no) from exc
        if not np.all(np.isfinite(values)):
            raise ParseError(f"{path.name}: non-finite value", line=line_no)
        rows.append((line_no, _canonical_label(fields[0]), values))
    return rows


def _split_ids(ids: list[str], train_fraction: float, seed: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if not 0.0 < train_fraction < 1.0:
        raise ConfigurationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(ids)
    n_train = min(max(1, int(round(n * train_fraction))), n - 1) if n > 1 else n
    order = np.random.default_rng(seed).permutation(n)
    train_idx = set(order[:n_train].tolist())
    train = tuple(i for k, i in enumerate(ids) if k in train_idx)
    test = tuple(i for k, i in enumerate(ids) if k not in train_idx)
    return train, test


def parse_ucr(
    path: str | Path,
    delimiter: Optional[str] = None,
    *,
    test_path: str | Path | None = None,
    name: Optional[str] = None,
    train_fraction: float = 0.7,
    seed: int = 0,
) -> Dataset:
    """Parse a UCR file (or a TRAIN/TEST pair) into a :class:`Dataset`.

    Labels are remapped to ``0..C-1`` in order of first appearance, train file
    first. With a single file the split is a seeded ``train_fraction`` partition.
    """
    if delimiter is not None and delimiter not in DELIMITERS:
        raise ConfigurationError(f"delimiter must be one of {sorted(DELIMITERS)}, got {delimiter!r}")
    path = Path(path)
    name = name or path.stem.replace("_TRAIN", "")

    train_rows = _read_rows(path, delimiter)
    test_rows = _read_rows(Path(test_path), delimiter) if test_path is not None else []
    if not train_rows and not test_rows:
        raise EmptyDatasetError(f"{path} contains no windows")
    if train_rows and test_rows and train_rows[0][2].shape != test_rows[0][2].shape:
        raise ParseError(
            f"{Path(test_path).name}: window length {test_rows[0][2].shape[0]} differs from "
            f"train length {train_rows[0][2].shape[0]}",
            line=test_rows[0][0],
        )

    label_names: list[str] = []
    label_index: dict[str, int] = {}
    windows: list[LabeledWindow] = []
    for k, (_, raw_label, values) in enumerate(train_rows + test_rows):
        if raw_label not in label_index:
            label_index[raw_label] = len(label_names)
            label_names.append(raw_label)
        windows.append(LabeledWindow(window_id=f"w{k:05d}", values=values, label=label_index[raw_label]))

    ids = [w.window_id for w in windows]
    if test_path is not None:
        train_ids, test_ids = tuple(ids[: len(train_rows)]), tuple(ids[len(train_rows):])
    else:
        train_ids, test_ids = _split_ids(ids, train_fraction, seed)

    dataset = Dataset(
        name=name,
        windows=windows,
        num_classes=len(label_names),
        train_ids=train_ids,
        test_ids=test_ids,
        label_names=tuple(label_names),
    )
    logger.info(
        "parsed dataset=%s windows=%d d=%d classes=%d train=%d test=%d",
        name, len(windows), dataset.window_length, dataset.num_classes, len(train_ids), len(test_ids),
    )
    return dataset


def _format_float(value: float) -> str:
    return repr(float(value))


def write_canonical(dataset: Dataset, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    position = {w.window_id: k for k, w in enumerate(dataset.windows)}
    header = [
        f"name={dataset.name}",
        f"classes={dataset.num_classes}",
        f"d={dataset.window_length}",
        "labels=" + ",".join(dataset.label_names),
    ]
    if dataset.normalization is not None:
        header.append(f"mean={_format_float(dataset.normalization.mean)}")
        header.append(f"std={_format_float(dataset.normalization.std)}")
    header.append("test=" + ",".join(str(position[i]) for i in dataset.test_ids))

    lines = ["# " + " ".join(header)]
    for w in dataset.windows:
        lines.append(",".join([str(w.label)] + [_format_float(v) for v in w.values]))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out


def _parse_header(line: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for token in line.lstrip("#").split():
        if "=" not in token:
            raise ParseError(f"malformed header token {token!r}", line=1)
        key, value = token.split("=", 1)
        fields[key] = value
    return fields


def read_canonical(path: str | Path) -> Dataset:
    path = Path(path)
    try:
        first = path.read_text(encoding="utf-8").splitlines()[:1]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not first or not first[0].startswith("#"):
        raise ParseError(f"{path.name}: missing '#' metadata header", line=1)
    meta = _parse_header(first[0])
    for key in ("name", "classes", "d", "test"):
        if key not in meta:
            raise ParseError(f"{path.name}: header lacks {key}=", line=1)

    rows = _read_rows(path, "comma")
    if not rows:
        raise EmptyDatasetError(f"{path} contains no windows")
    num_classes = int(meta["classes"])
    windows = []
    for k, (line_no, raw_label, values) in enumerate(rows):
        try:
            label = int(raw_label)
        except ValueError as exc:
            raise ParseError(f"{path.name}: label {raw_label!r} is not a class index", line=line_no) from exc
        if values.shape[0] != int(meta["d"]):
            raise ParseError(f"{path.name}: row length differs from header d={meta['d']}", line=line_no)
        windows.append(LabeledWindow(window_id=f"w{k:05d}", values=values, label=label))

    test_positions = {int(p) for p in meta["test"].split(",") if p}
    ids = [w.window_id for w in windows]
    normalization = None
    if "mean" in meta and "std" in meta:
        normalization = Normalization(mean=float(meta["mean"]), std=float(meta["std"]))
    labels = tuple(meta["labels"].split(",")) if meta.get("labels") else ()
    return Dataset(
        name=meta["name"],
        windows=windows,
        num_classes=num_classes,
        train_ids=tuple(i for k, i in enumerate(ids) if k not in test_positions),
        test_ids=tuple(i for k, i in enumerate(ids) if k in test_positions),
        label_names=labels,
        normalization=normalization,
    )
