from __future__ import annotations

import argparse
from pathlib import Path

import pytest

from common.config import apply_overrides, deep_update, env_overrides
from common.errors import ConfigurationError
from common.seeding import derive_seed
from pipeline import ExperimentConfig, resolve_config

ROOT = Path(__file__).resolve().parents[1]


def _args(**kwargs) -> argparse.Namespace:
    defaults = {"config": None, "set": [], "seed": None, "out": None}
    defaults.update(kwargs)
    return argparse.Namespace(**defaults)


def test_shipped_configs_parse() -> None:
    for name in ("base.yaml", "smoke.yaml"):
        _, cfg = resolve_config(_args(config=str(ROOT / "configs" / name)))
        assert cfg.models == ["recurrent", "temporal_conv", "attention"]
        assert cfg.explainers == ["fp", "fa", "ig"]


def test_defaults_follow_reference_settings() -> None:
    cfg = ExperimentConfig.from_dict({})
    assert cfg.framing.alpha == 4
    assert str(cfg.framing.beta_fraction) == "5/3"
    assert cfg.evaluation.robustness_placements == ["middle"]
    assert cfg.protocols == ["consistency", "robustness"]


def test_override_precedence(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    path = tmp_path / "c.yaml"
    path.write_text("seed: 1\ntrain:\n  epochs: 5\n  batch_size: 8\n", encoding="utf-8")
    monkeypatch.setenv("SALIENCY_AUDIT__TRAIN__EPOCHS", "9")
    monkeypatch.setenv("SALIENCY_AUDIT__SEED", "2")

    _, cfg = resolve_config(_args(config=str(path)))
    assert (cfg.seed, cfg.train.epochs, cfg.train.batch_size) == (2, 9, 8)

    _, cfg = resolve_config(_args(config=str(path), set=["train.epochs=12", "seed=3"]))
    assert (cfg.seed, cfg.train.epochs) == (3, 12)

    raw, cfg = resolve_config(_args(config=str(path), set=["seed=3"], seed=4, out=str(tmp_path / "o")))
    assert cfg.seed == 4
    assert raw["output_dir"] == str(tmp_path / "o")


def test_override_helpers() -> None:
    assert deep_update({"a": {"b": 1, "c": 2}}, {"a": {"b": 3}}) == {"a": {"b": 3, "c": 2}}
    merged = apply_overrides({}, ["framing.placements=[top, bottom]", "attribution.score=probability"], environ={})
    assert merged == {"framing": {"placements": ["top", "bottom"]}, "attribution": {"score": "probability"}}
    assert env_overrides({"SALIENCY_AUDIT__MODEL__HIDDEN_SIZE": "8", "OTHER": "1"}) == {"model": {"hidden_size": 8}}
    with pytest.raises(ConfigurationError):
        apply_overrides({}, ["no-equals-sign"], environ={})


def test_invalid_configs() -> None:
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"framing": {"alpha": 1}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"train": {"epochs": 3, "momentum": 0.9}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"models": ["gru"]})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"evaluation": {"swap": [1, 1]}})


def test_derived_seeds_are_stable_and_distinct() -> None:
    assert derive_seed(7, "noise", "IPD", "w00001", "top") == derive_seed(7, "noise", "IPD", "w00001", "top")
    seeds = {
        derive_seed(7, "noise", "IPD", "w00001", "top"),
        derive_seed(7, "noise", "IPD", "w00001", "middle"),
        derive_seed(8, "noise", "IPD", "w00001", "top"),
        derive_seed(7, "init", "IPD", "recurrent", "plain"),
    }
    assert len(seeds) == 4
    assert all(0 <= s < 2**64 for s in seeds)
