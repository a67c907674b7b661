from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from common.errors import DegenerateDatasetError, EmptyDatasetError, ParseError
from ingest import (
    SyntheticSpec,
    class_patterns,
    normalize,
    parse_ucr,
    read_canonical,
    resolve_ucr_paths,
    synthesize,
    write_canonical,
)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def test_parse_train_test_pair_remaps_labels(tmp_path: Path) -> None:
    train = _write(tmp_path / "Toy_TRAIN.tsv", "2\t1.0\t2.0\t3.0\n-1\t0.5\t0.5\t1.5\n2\t4.0\t4.0\t4.0\n")
    test = _write(tmp_path / "Toy_TEST.tsv", "-1\t1.0\t1.0\t0.0\n")
    dataset = parse_ucr(train, test_path=test)

    assert dataset.name == "Toy"
    assert dataset.num_classes == 2
    assert dataset.label_names == ("2", "-1")
    assert dataset.labels().tolist() == [0, 1, 0, 1]
    assert dataset.train_ids == ("w00000", "w00001", "w00002")
    assert dataset.test_ids == ("w00003",)
    assert dataset.window_length == 3


def test_parse_comma_file_and_float_labels(tmp_path: Path) -> None:
    path = _write(tmp_path / "c.txt", "1.0,1,2,3\n2.0,3,2,1\n1,0,0,1\n")
    dataset = parse_ucr(path, "comma", train_fraction=0.5, seed=3)
    assert dataset.label_names == ("1", "2")
    assert len(dataset.train_ids) + len(dataset.test_ids) == 3
    assert not set(dataset.train_ids) & set(dataset.test_ids)


def test_single_file_split_is_seeded(tmp_path: Path) -> None:
    rows = "\n".join(f"{k % 2},{k},{k + 1},{k + 2}" for k in range(20))
    path = _write(tmp_path / "s.csv", rows + "\n")
    first = parse_ucr(path, train_fraction=0.7, seed=9)
    second = parse_ucr(path, train_fraction=0.7, seed=9)
    assert first.train_ids == second.train_ids
    assert len(first.train_ids) == 14


def test_ragged_row_reports_line(tmp_path: Path) -> None:
    path = _write(tmp_path / "bad.tsv", "0\t1\t2\t3\n# comment\n1\t1\t2\n")
    with pytest.raises(ParseError) as info:
        parse_ucr(path)
    assert info.value.line == 3


def test_non_numeric_field(tmp_path: Path) -> None:
    path = _write(tmp_path / "bad.csv", "0,1,2,3\n1,1,x,3\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_ucr(path)


def test_empty_file(tmp_path: Path) -> None:
    path = _write(tmp_path / "empty.csv", "# nothing here\n")
    with pytest.raises(EmptyDatasetError):
        parse_ucr(path)


def test_normalize_uses_train_statistics(tmp_path: Path) -> None:
    train = _write(tmp_path / "N_TRAIN.csv", "0,1,2,3\n1,3,4,5\n")
    test = _write(tmp_path / "N_TEST.csv", "0,100,100,100\n")
    dataset = normalize(parse_ucr(train, test_path=test))
    values = dataset.values(dataset.train_ids)
    assert values.mean() == pytest.approx(0.0, abs=1e-12)
    assert values.std() == pytest.approx(1.0, abs=1e-12)
    assert dataset.normalization.mean == pytest.approx(3.0)
    assert dataset.window("w00002").values[0] > 10.0


def test_normalize_rejects_constant_train_split(tmp_path: Path) -> None:
    path = _write(tmp_path / "C_TRAIN.csv", "0,2,2,2\n1,2,2,2\n")
    test = _write(tmp_path / "C_TEST.csv", "0,1,2,3\n")
    with pytest.raises(DegenerateDatasetError):
        normalize(parse_ucr(path, test_path=test))


def test_canonical_file_round_trip(tmp_path: Path, synthetic_dataset) -> None:
    path = write_canonical(synthetic_dataset, tmp_path / "syn.canonical.csv")
    loaded = read_canonical(path)
    assert loaded.name == synthetic_dataset.name
    assert loaded.train_ids == synthetic_dataset.train_ids
    assert loaded.test_ids == synthetic_dataset.test_ids
    assert loaded.normalization == synthetic_dataset.normalization
    np.testing.assert_array_equal(loaded.values(), synthetic_dataset.values())
    assert loaded.fingerprint() == synthetic_dataset.fingerprint()


def test_canonical_requires_header(tmp_path: Path) -> None:
    path = _write(tmp_path / "x.csv", "0,1,2,3\n")
    with pytest.raises(ParseError):
        read_canonical(path)


def test_resolve_archive_layout(tmp_path: Path) -> None:
    base = tmp_path / "ItalyPowerDemand"
    base.mkdir()
    _write(base / "ItalyPowerDemand_TRAIN.tsv", "1\t0\t1\t2\n")
    _write(base / "ItalyPowerDemand_TEST.tsv", "2\t0\t1\t2\n")
    train, test = resolve_ucr_paths(tmp_path, "IPD")
    assert train.name == "ItalyPowerDemand_TRAIN.tsv"
    assert test.name == "ItalyPowerDemand_TEST.tsv"


def test_synthetic_is_deterministic_and_balanced() -> None:
    spec = SyntheticSpec(d=16, num_windows=60, seed=2)
    a, b = synthesize(spec), synthesize(spec)
    np.testing.assert_array_equal(a.values(), b.values())
    assert a.labels().sum() == 30
    templates = class_patterns(spec)
    assert templates.shape == (2, 16)
    assert np.argmax(np.abs(templates[0])) < 8 <= np.argmax(np.abs(templates[1]))
    assert templates[0].max() > 0 > templates[1].min()


def test_synthetic_is_linearly_separable() -> None:
    dataset = normalize(synthesize(SyntheticSpec(d=24, num_windows=200, seed=9)))
    x_train = np.stack([w.values for w in dataset.train()])
    y_train = np.array([w.label for w in dataset.train()])
    x_test = np.stack([w.values for w in dataset.test()])
    y_test = np.array([w.label for w in dataset.test()])

    design = np.hstack([x_train, np.ones((len(x_train), 1))])
    weights, *_ = np.linalg.lstsq(design, 2.0 * y_train - 1.0, rcond=None)
    scores = np.hstack([x_test, np.ones((len(x_test), 1))]) @ weights
    assert np.mean((scores > 0) == (y_test == 1)) > 0.95
