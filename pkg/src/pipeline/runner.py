from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import pandas as pd
import scipy
import yaml

from attribution import AttributionConfig, ExplainerKind, SaliencyMap, ig_reference, make_explainer
from common.errors import AuditError, CoordinateError
from common.seeding import derive_rng, derive_seed
from evaluation import (
    EvaluationRecord,
    choose_swap,
    consistency_eval,
    records_frame,
    robustness_eval,
    signal_row_share,
    time_profile,
    write_records,
)
from framing import FramingConfig, PaddedFrame, Placement, SwapSpec, build_variants, stack_frames, swap_features
from ingest import Dataset, LabeledWindow, SyntheticSpec, normalize, parse_ucr, read_canonical, resolve_ucr_paths, synthesize
from models import Arch, Checkpoint, Classifier, ClassifierConfig, accuracy, build, load_checkpoint, save_checkpoint, train
from pipeline.config import DatasetSpec, ExperimentConfig
from pipeline.report import leader_by_dataset, model_order, write_report

logger = logging.getLogger(__name__)

PLAIN = "plain"


def load_dataset(spec: DatasetSpec, master_seed: int) -> Dataset:
    if spec.source == "synthetic":
        settings = {"name": spec.name, "train_fraction": spec.train_fraction, **spec.synthetic}
        settings.setdefault("seed", derive_seed(master_seed, "synthetic", spec.name))
        dataset = synthesize(SyntheticSpec.from_dict(settings))
    elif spec.source == "canonical":
        dataset = read_canonical(spec.path)
    else:
        train_path, test_path = (
            resolve_ucr_paths(spec.root, spec.name) if spec.root else (spec.path, spec.test_path)
        )
        dataset = parse_ucr(
            train_path,
            spec.delimiter,
            test_path=test_path,
            name=spec.name,
            train_fraction=spec.train_fraction,
            seed=derive_seed(master_seed, "split", spec.name),
        )
    if spec.normalize and dataset.normalization is None:
        dataset = normalize(dataset)
    return dataset


def noise_seeds(master_seed: int, dataset: str) -> Callable[[LabeledWindow, Placement], int]:
    def seed_for(window: LabeledWindow, placement: Placement) -> int:
        return derive_seed(master_seed, "noise", dataset, window.window_id, placement.value)

    return seed_for


def variant_frames(
    windows: Sequence[LabeledWindow],
    framing: FramingConfig,
    seed_for: Callable[[LabeledWindow, Placement], int],
    placements: Sequence[str],
    swap: Optional[SwapSpec] = None,
) -> list[PaddedFrame]:
    frames = []
    for window in windows:
        for frame in build_variants(window, framing, seed_for, placements).values():
            frames.append(swap_features(frame, swap) if swap is not None else frame)
    return frames


def _labels(frames: Sequence[PaddedFrame]) -> np.ndarray:
    return np.array([f.label for f in frames], dtype=np.int64)


def classifier_config(
    cfg: ExperimentConfig,
    arch: str,
    dataset: Dataset,
    variant: str,
) -> ClassifierConfig:
    settings = cfg.model
    return ClassifierConfig(
        arch=arch,
        hidden_size=settings.hidden_size,
        num_layers=settings.num_layers,
        num_classes=dataset.num_classes,
        input_features=cfg.framing.alpha,
        seq_len=cfg.framing.frame_length(dataset.window_length),
        seed=derive_seed(cfg.seed, "init", dataset.name, arch, variant),
        kernel_size=settings.kernel_size,
        dilations=list(settings.dilations),
        num_heads=settings.num_heads,
    )


def cache_key(payload: dict[str, Any]) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass(slots=True)
class TrainedModel:
    model: Classifier
    checkpoint: Checkpoint
    variant: str
    placements: list[str]
    cached: bool
    path: Path
    train_accuracy: float
    test_accuracy: float


def train_or_load(
    cfg: ExperimentConfig,
    dataset: Dataset,
    arch: str,
    placements: Sequence[str],
    cache_dir: Path,
    swap: Optional[SwapSpec] = None,
) -> TrainedModel:
    """Train one model on the padded variants of the train split, reusing a cached checkpoint.

    The cache key covers everything that determines the parameters, so a plain
    model shared by both protocols is trained once.
    """
    variant = swap.label if swap is not None else PLAIN
    model_cfg = classifier_config(cfg, arch, dataset, variant)
    train_cfg = replace(cfg.train, seed=derive_seed(cfg.seed, "batch", dataset.name, arch, variant))
    fingerprint = dataset.fingerprint()
    seed_for = noise_seeds(cfg.seed, dataset.name)
    key = cache_key(
        {
            "model": asdict(model_cfg),
            "train": asdict(train_cfg),
            "framing": {"alpha": cfg.framing.alpha, "beta": str(cfg.framing.beta_fraction),
                        "signal_feature": cfg.framing.signal_feature},
            "placements": list(placements),
            "swap": variant,
            "fingerprint": fingerprint,
            "seed": cfg.seed,
        }
    )
    path = cache_dir / f"{dataset.name}-{arch}-{variant}-{key}.npz"

    train_frames = variant_frames(dataset.train(), cfg.framing, seed_for, placements, swap)
    test_frames = variant_frames(dataset.test(), cfg.framing, seed_for, placements, swap)
    x_train, y_train = stack_frames(train_frames), _labels(train_frames)
    x_test = stack_frames(test_frames) if test_frames else None
    y_test = _labels(test_frames)

    cached = path.exists()
    if cached:
        checkpoint = load_checkpoint(path)
        model = checkpoint.restore()
        logger.info("checkpoint=cached dataset=%s arch=%s variant=%s path=%s", dataset.name, arch, variant, path.name)
    else:
        model = build(model_cfg)
        checkpoint = train(
            model,
            x_train,
            y_train,
            train_cfg,
            fingerprint=fingerprint,
            eval_frames=x_test,
            eval_labels=y_test,
        )
        save_checkpoint(checkpoint, path)
        logger.info("checkpoint=trained dataset=%s arch=%s variant=%s path=%s", dataset.name, arch, variant, path.name)
    return TrainedModel(
        model=model,
        checkpoint=checkpoint,
        variant=variant,
        placements=list(placements),
        cached=cached,
        path=path,
        train_accuracy=accuracy(model, x_train, y_train),
        test_accuracy=accuracy(model, x_test, y_test) if x_test is not None else float("nan"),
    )


def explainer_for(
    cfg: ExperimentConfig,
    kind: str,
    dataset: Dataset,
    arch: str,
    reference_frames: Sequence[PaddedFrame],
    attribution: Optional[AttributionConfig] = None,
):
    attribution = attribution or cfg.attribution

    def fp_seed(frames: Sequence[PaddedFrame]) -> int:
        placement = frames[0].placement.value if frames else ""
        return derive_seed(cfg.seed, "fp", dataset.name, arch, placement)

    reference = ig_reference(reference_frames, attribution) if kind == ExplainerKind.INTEGRATED_GRADIENTS.value else None
    return make_explainer(kind, attribution, seed=fp_seed, reference=reference)


def evaluation_windows(cfg: ExperimentConfig, dataset: Dataset) -> list[LabeledWindow]:
    windows = dataset.test()
    cap = cfg.evaluation.max_test_windows
    return windows[:cap] if cap is not None else windows


@dataclass(slots=True)
class ReportBundle:
    out_dir: Path
    records: list[EvaluationRecord]
    paths: dict[str, Path] = field(default_factory=dict)
    manifest: dict[str, Any] = field(default_factory=dict)


class ProfileCollector:
    def __init__(self) -> None:
        self.rows: list[dict[str, Any]] = []

    def hook(self, dataset: str, model: str, explainer: str) -> Callable[[SaliencyMap, PaddedFrame], None]:
        def on_map(saliency: SaliencyMap, frame: PaddedFrame) -> None:
            share = signal_row_share(saliency, frame)
            for k, value in enumerate(time_profile(saliency)):
                self.rows.append(
                    {
                        "dataset": dataset,
                        "model": model,
                        "explainer": explainer,
                        "placement": frame.placement.value,
                        "window_id": frame.source_window_id,
                        "timestamp": k,
                        "mean_abs": float(value),
                        "signal_row_share": share,
                    }
                )

        return on_map

    def table(self) -> pd.DataFrame:
        columns = ["dataset", "model", "explainer", "placement", "timestamp", "mean_abs", "signal_row_share"]
        if not self.rows:
            return pd.DataFrame(columns=columns)
        frame = pd.DataFrame(self.rows)
        keys = ["dataset", "model", "explainer", "placement", "timestamp"]
        return frame.groupby(keys, sort=False, as_index=False)[["mean_abs", "signal_row_share"]].mean()[columns]


def _versions() -> dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def _run_dataset(
    cfg: ExperimentConfig,
    spec: DatasetSpec,
    cache_dir: Path,
    records: list[EvaluationRecord],
    profiles: ProfileCollector,
    models_info: list[dict[str, Any]],
    histories: list[pd.DataFrame],
) -> None:
    try:
        dataset = load_dataset(spec, cfg.seed)
    except AuditError as exc:
        raise CoordinateError(exc, spec.name) from exc
    windows = evaluation_windows(cfg, dataset)
    seed_for = noise_seeds(cfg.seed, dataset.name)
    k = cfg.evaluation.k
    workers = cfg.evaluation.workers
    swap: Optional[SwapSpec] = None
    if "robustness" in cfg.protocols:
        try:
            swap = choose_swap(
                cfg.evaluation.swap, cfg.framing.alpha, cfg.framing.signal_feature, derive_rng(cfg.seed, "swap", dataset.name)
            )
        except AuditError as exc:
            raise CoordinateError(exc, dataset.name) from exc

    for arch in cfg.models:
        name = Arch.parse(arch).display_name
        try:
            trained: dict[str, TrainedModel] = {}
            if "consistency" in cfg.protocols:
                trained["consistency"] = train_or_load(cfg, dataset, arch, cfg.framing.placements, cache_dir)
            if swap is not None:
                placements = cfg.evaluation.robustness_placements
                trained["plain"] = train_or_load(cfg, dataset, arch, placements, cache_dir)
                trained["swapped"] = train_or_load(cfg, dataset, arch, placements, cache_dir, swap)
        except AuditError as exc:
            raise CoordinateError(exc, dataset.name, name) from exc
        for role, item in trained.items():
            models_info.append(
                {
                    "dataset": dataset.name,
                    "model": name,
                    "role": role,
                    "variant": item.variant,
                    "placements": item.placements,
                    "parameters": item.model.num_parameters,
                    "epochs": len(item.checkpoint.history) - 1,
                    "train_accuracy": item.train_accuracy,
                    "test_accuracy": item.test_accuracy,
                    "checkpoint": item.path.name,
                    "cached": item.cached,
                }
            )
            histories.append(
                item.checkpoint.history_frame().assign(dataset=dataset.name, model=name, role=role, variant=item.variant)
            )

        reference = variant_frames(dataset.train(), cfg.framing, seed_for, cfg.framing.placements)
        for kind in cfg.explainers:
            label = ExplainerKind.parse(kind).display_name
            try:
                if "consistency" in cfg.protocols:
                    explainer = explainer_for(cfg, kind, dataset, arch, reference)
                    records.extend(
                        consistency_eval(
                            trained["consistency"].model,
                            windows,
                            explainer,
                            cfg.framing,
                            seed_for,
                            dataset=dataset.name,
                            model_name=name,
                            explainer_name=label,
                            k=k,
                            workers=workers,
                            on_map=profiles.hook(dataset.name, name, label),
                        )
                    )
                if swap is not None:
                    explainer = explainer_for(cfg, kind, dataset, arch, reference)
                    records.extend(
                        robustness_eval(
                            trained["plain"].model,
                            trained["swapped"].model,
                            windows,
                            swap,
                            explainer,
                            cfg.framing,
                            seed_for,
                            dataset=dataset.name,
                            model_name=name,
                            explainer_name=label,
                            placements=cfg.evaluation.robustness_placements,
                            k=k,
                            workers=workers,
                        )
                    )
            except AuditError as exc:
                raise CoordinateError(exc, dataset.name, name, label) from exc
            logger.info("cell dataset=%s model=%s explainer=%s records=%d", dataset.name, name, label, len(records))


def run_experiment(
    cfg: ExperimentConfig,
    raw_config: dict[str, Any],
    out_dir: str | Path | None = None,
    fmt: str = "csv",
) -> ReportBundle:
    """Run the full matrix and write the report bundle.

    On failure the records gathered so far and ``failure_manifest.json`` are
    written before the error propagates.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache_dir = out / "checkpoints"
    started = time.time()
    records: list[EvaluationRecord] = []
    profiles = ProfileCollector()
    models_info: list[dict[str, Any]] = []
    histories: list[pd.DataFrame] = []
    bundle = ReportBundle(out_dir=out, records=records)

    manifest: dict[str, Any] = {
        "config": raw_config,
        "resolved_config": cfg.to_dict(),
        "master_seed": cfg.seed,
        "versions": _versions(),
        "orientation": "rows=features, columns=time",
    }
    try:
        for spec in cfg.datasets:
            _run_dataset(cfg, spec, cache_dir, records, profiles, models_info, histories)
    except CoordinateError as exc:
        bundle.paths["records"] = write_records(records, out / "records.csv")
        failure = {**manifest, **exc.as_dict(), "records_flushed": len(records), "models": models_info}
        path = out / "failure_manifest.json"
        path.write_text(json.dumps(failure, indent=2, default=str), encoding="utf-8")
        logger.error("run failed at %s; %d records flushed to %s", exc.coordinate(), len(records), out)
        raise

    bundle.paths["records"] = write_records(records, out / "records.csv")
    frame = records_frame(records)
    bundle.paths.update(write_report(frame, out, fmt))
    profile_path = out / "time_profile.csv"
    profiles.table().to_csv(profile_path, index=False)
    bundle.paths["time_profile"] = profile_path
    if histories:
        history_path = out / "training_history.csv"
        pd.concat(histories, ignore_index=True).to_csv(history_path, index=False)
        bundle.paths["training_history"] = history_path

    order = model_order(frame)
    leads = leader_by_dataset(order)
    ig_order = {}
    for dataset, part in order.groupby("dataset", sort=False):
        ig_order[dataset] = {
            "models": part["model"].tolist(),
            "mean_tau": part["mean_tau"].tolist(),
            "lstm_first": leads[dataset],
        }
        logger.info(
            "ig_order dataset=%s models=%s lstm_first=%s", dataset, ",".join(ig_order[dataset]["models"]), leads[dataset]
        )

    undefined = {
        "tau": int(frame["tau"].isna().sum()),
        "rho": int(frame["rho"].isna().sum()),
    }
    manifest.update(
        {
            "models": models_info,
            "records": len(records),
            "undefined_correlations": undefined,
            "ig_consistency_order": ig_order,
            "wall_clock_seconds": round(time.time() - started, 3),
        }
    )
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")
    bundle.paths["manifest"] = manifest_path
    bundle.manifest = manifest
    return bundle
