from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any

from attribution import (
    ExplainerKind,
    feature_ablation,
    feature_permutation,
    integrated_gradients,
    make_explainer,
    render_heatmap,
    write_map,
)
from common.config import apply_overrides, deep_update, load_yaml
from common.errors import ConfigurationError, DataError
from common.seeding import derive_rng
from evaluation import choose_swap, consistency_eval, read_records, records_frame, robustness_eval, write_records
from framing import SwapSpec, read_frame, write_frame
from ingest import Dataset, read_canonical, write_canonical
from models import Arch, Checkpoint, load_checkpoint
from pipeline.config import DatasetSpec, ExperimentConfig
from pipeline.report import map_row_sums, render, report_tables, write_report
from pipeline.runner import (
    ReportBundle,
    evaluation_windows,
    explainer_for,
    load_dataset,
    noise_seeds,
    run_experiment,
    train_or_load,
    variant_frames,
)

logger = logging.getLogger(__name__)


def resolve_config(args: argparse.Namespace) -> tuple[dict[str, Any], ExperimentConfig]:
    """YAML file < environment < ``--set`` < dedicated flags."""
    raw = load_yaml(args.config) if getattr(args, "config", None) else {}
    raw = apply_overrides(raw, getattr(args, "set", None) or [])
    dedicated: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        dedicated["seed"] = int(args.seed)
    if getattr(args, "out", None):
        dedicated["output_dir"] = str(args.out)
    raw = deep_update(raw, dedicated)
    return raw, ExperimentConfig.from_dict(raw)


def _out_dir(args: argparse.Namespace, cfg: ExperimentConfig) -> Path:
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_from_args(args: argparse.Namespace, cfg: ExperimentConfig) -> Dataset:
    if getattr(args, "dataset", None):
        return read_canonical(args.dataset)
    return load_dataset(cfg.datasets[0], cfg.seed)


def cmd_ingest(args: argparse.Namespace) -> Path:
    _, cfg = resolve_config(args)
    spec = cfg.datasets[0]
    if args.train:
        spec = DatasetSpec(
            name=args.name or Path(args.train).stem.replace("_TRAIN", ""),
            source="ucr",
            path=args.train,
            test_path=args.test,
            delimiter=args.delimiter,
            train_fraction=spec.train_fraction,
        )
    dataset = load_dataset(spec, cfg.seed)
    out = _out_dir(args, cfg)
    path = write_canonical(dataset, out / f"{dataset.name}.canonical.csv")
    written = 0
    if args.write_frames:
        seed_for = noise_seeds(cfg.seed, dataset.name)
        for frame in variant_frames(evaluation_windows(cfg, dataset), cfg.framing, seed_for, cfg.framing.placements):
            write_frame(frame, out / "frames" / f"{frame.source_window_id}-{frame.placement.value}.frame.csv")
            written += 1
    print(
        f"Ingested {dataset.name}: {len(dataset)} windows, d={dataset.window_length}, "
        f"{dataset.num_classes} classes, train={len(dataset.train_ids)} test={len(dataset.test_ids)}"
    )
    if written:
        print(f"Wrote {written} frame files to {(out / 'frames').resolve()}")
    print(f"Saved canonical dataset to {path.resolve()}")
    return path


def _parse_swap(raw: str | None) -> SwapSpec | None:
    if not raw:
        return None
    try:
        i, j = (int(part) for part in raw.split(","))
    except ValueError as exc:
        raise ConfigurationError(f"--swap must look like i,j, got {raw!r}") from exc
    return SwapSpec(i, j)


def cmd_train(args: argparse.Namespace) -> Path:
    _, cfg = resolve_config(args)
    dataset = _dataset_from_args(args, cfg)
    arch = Arch.parse(args.arch).value
    swap = _parse_swap(args.swap)
    placements = args.placements or cfg.framing.placements
    out = _out_dir(args, cfg)
    trained = train_or_load(cfg, dataset, arch, placements, out / "checkpoints", swap)
    print(
        f"{Arch.parse(arch).display_name} ({trained.variant}) params={trained.model.num_parameters} "
        f"train_acc={trained.train_accuracy:.3f} test_acc={trained.test_accuracy:.3f}"
    )
    print(f"Saved checkpoint to {trained.path.resolve()}")
    return trained.path


def cmd_explain(args: argparse.Namespace) -> list[Path]:
    _, cfg = resolve_config(args)
    checkpoint: Checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.restore()
    frames = [read_frame(p) for p in args.frame]
    kind = ExplainerKind.parse(args.explainer)
    attribution = cfg.attribution
    if args.target is not None:
        if kind is ExplainerKind.FEATURE_PERMUTATION:
            maps = feature_permutation(model, frames, args.target, attribution, seed=cfg.seed)
        elif kind is ExplainerKind.FEATURE_ABLATION:
            maps = [feature_ablation(model, f, args.target, attribution) for f in frames]
        else:
            maps = [integrated_gradients(model, f, args.target, attribution) for f in frames]
    else:
        maps = make_explainer(kind, attribution, seed=cfg.seed)(model, frames)
    for m in maps:
        m.seed = cfg.seed

    out = _out_dir(args, cfg)
    written = []
    for saliency, source in zip(maps, args.frame):
        stem = Path(source).name.replace(".frame.csv", "").replace(".csv", "")
        path = write_map(saliency, out / f"{stem}-{kind.value}.map.csv")
        written.append(path)
        if args.heatmap:
            text = render_heatmap(saliency)
            (out / f"{stem}-{kind.value}.heatmap.txt").write_text(text + "\n", encoding="utf-8")
            print(text)
    print(f"Saved {len(written)} saliency map(s) to {out.resolve()}")
    return written


def _explainer_kinds(args: argparse.Namespace, cfg: ExperimentConfig) -> list[str]:
    return [ExplainerKind.parse(e).value for e in args.explainer] if args.explainer else list(cfg.explainers)


def cmd_eval_consistency(args: argparse.Namespace) -> Path:
    _, cfg = resolve_config(args)
    dataset = _dataset_from_args(args, cfg)
    checkpoint = load_checkpoint(args.checkpoint)
    _check_fingerprint(checkpoint, args.checkpoint, dataset)
    model = checkpoint.restore()
    seed_for = noise_seeds(cfg.seed, dataset.name)
    reference = variant_frames(dataset.train(), cfg.framing, seed_for, cfg.framing.placements)
    windows = evaluation_windows(cfg, dataset)
    name = model.arch.display_name
    records = []
    for kind in _explainer_kinds(args, cfg):
        explainer = explainer_for(cfg, kind, dataset, model.arch.value, reference)
        records.extend(
            consistency_eval(
                model,
                windows,
                explainer,
                cfg.framing,
                seed_for,
                dataset=dataset.name,
                model_name=name,
                explainer_name=ExplainerKind.parse(kind).display_name,
                k=cfg.evaluation.k,
                workers=cfg.evaluation.workers,
            )
        )
    path = write_records(records, _out_dir(args, cfg) / "records.csv")
    print(f"Saved {len(records)} consistency records to {path.resolve()}")
    return path


def cmd_eval_robustness(args: argparse.Namespace) -> Path:
    _, cfg = resolve_config(args)
    dataset = _dataset_from_args(args, cfg)
    out = _out_dir(args, cfg)
    placements = cfg.evaluation.robustness_placements
    swap = _parse_swap(args.swap) or choose_swap(
        cfg.evaluation.swap, cfg.framing.alpha, cfg.framing.signal_feature, derive_rng(cfg.seed, "swap", dataset.name)
    )
    if args.checkpoint:
        checkpoint = load_checkpoint(args.checkpoint)
        _check_fingerprint(checkpoint, args.checkpoint, dataset)
        plain = checkpoint.restore()
        arch = plain.arch.value
    else:
        if not args.arch:
            raise ConfigurationError("eval-robustness needs --checkpoint or --arch")
        arch = Arch.parse(args.arch).value
        plain = train_or_load(cfg, dataset, arch, placements, out / "checkpoints").model
    if args.swapped_checkpoint:
        swapped = load_checkpoint(args.swapped_checkpoint).restore()
    else:
        swapped = train_or_load(cfg, dataset, arch, placements, out / "checkpoints", swap).model

    seed_for = noise_seeds(cfg.seed, dataset.name)
    reference = variant_frames(dataset.train(), cfg.framing, seed_for, cfg.framing.placements)
    windows = evaluation_windows(cfg, dataset)
    records = []
    for kind in _explainer_kinds(args, cfg):
        records.extend(
            robustness_eval(
                plain,
                swapped,
                windows,
                swap,
                explainer_for(cfg, kind, dataset, arch, reference),
                cfg.framing,
                seed_for,
                dataset=dataset.name,
                model_name=Arch.parse(arch).display_name,
                explainer_name=ExplainerKind.parse(kind).display_name,
                placements=placements,
                k=cfg.evaluation.k,
                workers=cfg.evaluation.workers,
            )
        )
    path = write_records(records, out / "records.csv")
    print(f"Saved {len(records)} robustness records ({swap.label}) to {path.resolve()}")
    return path


def _check_fingerprint(checkpoint: Checkpoint, checkpoint_path: str, dataset: Dataset) -> None:
    if checkpoint.fingerprint and checkpoint.fingerprint != dataset.fingerprint():
        logger.warning("checkpoint=%s fingerprint differs from dataset=%s", Path(checkpoint_path).name, dataset.name)


def cmd_report(args: argparse.Namespace) -> str:
    if args.from_map:
        sums = map_row_sums(args.from_map)
        text = sums.to_csv(index=False) if args.format == "csv" else render(sums, "md", title="map row sums")
        print(text, end="")
        return text
    if not args.records:
        raise ConfigurationError("report needs --records FILE or --from-map FILE")
    frame = read_records(args.records)
    if frame.empty:
        raise DataError(f"{args.records} holds no records")
    if args.out:
        paths = write_report(frame, args.out, args.format)
        print(f"Saved {len(paths)} report files to {Path(args.out).resolve()}")
    chunks = [render(table, args.format, title=name.replace("_", " ")) for name, table in report_tables(frame).items()]
    text = "\n".join(chunks)
    print(text, end="")
    return text


def cmd_run(args: argparse.Namespace) -> ReportBundle:
    raw, cfg = resolve_config(args)
    bundle = run_experiment(cfg, raw, args.out or cfg.output_dir, args.format)
    frame = records_frame(bundle.records)
    for name, table in report_tables(frame).items():
        print(f"\n{name.replace('_', ' ')}")
        print(table.to_string(index=False))
    print(f"\nSaved report bundle ({len(bundle.records)} records) to {bundle.out_dir.resolve()}")
    return bundle
