from __future__ import annotations

import argparse
from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from common.config import ENV_PREFIX
from common.errors import AuditError
from common.logging_setup import configure_logging
from pipeline import (
    cmd_eval_consistency,
    cmd_eval_robustness,
    cmd_explain,
    cmd_ingest,
    cmd_report,
    cmd_run,
    cmd_train,
)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="Path to YAML config")
    parser.add_argument("--seed", type=int, default=None, help="Master seed override (unsigned 64-bit)")
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument("--format", choices=["csv", "md"], default="csv", help="Table format")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help=f"Dotted config override, e.g. train.epochs=20 (env: {ENV_PREFIX}TRAIN__EPOCHS=20)",
    )
    parser.add_argument("--log-level", type=str, default="INFO", help="Logging level")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Train time-series classifiers and audit their saliency maps for consistency and robustness."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="Parse UCR files (or synthesize), normalize, write a canonical dataset")
    _common(p)
    p.add_argument("--train", type=str, default=None, help="UCR TRAIN file (or a single file to split)")
    p.add_argument("--test", type=str, default=None, help="UCR TEST file")
    p.add_argument("--name", type=str, default=None, help="Dataset name")
    p.add_argument("--delimiter", choices=["comma", "tab"], default=None, help="Field delimiter (auto if omitted)")
    p.add_argument("--write-frames", action="store_true", help="Also write padded test frames")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="Train one architecture on every padded variant")
    _common(p)
    p.add_argument("--dataset", type=str, default=None, help="Canonical dataset file")
    p.add_argument("--arch", type=str, required=True, help="recurrent|temporal_conv|attention (lstm|tcn|transformer)")
    p.add_argument("--swap", type=str, default=None, help="Train on frames with rows i,j swapped")
    p.add_argument("--placements", nargs="+", default=None, help="Placements to train on")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="Explain frame files with one checkpoint")
    _common(p)
    p.add_argument("--checkpoint", type=str, required=True, help="Checkpoint file")
    p.add_argument("--frame", nargs="+", required=True, help="Frame file(s); FP needs at least two")
    p.add_argument("--explainer", type=str, required=True, help="fp|fa|ig")
    p.add_argument("--target", type=int, default=None, help="Target class (default: per config)")
    p.add_argument("--heatmap", action="store_true", help="Also write and print a text heatmap")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("eval-consistency", help="Consistency protocol for one checkpoint")
    _common(p)
    p.add_argument("--dataset", type=str, default=None, help="Canonical dataset file")
    p.add_argument("--checkpoint", type=str, required=True, help="Checkpoint trained on all placements")
    p.add_argument("--explainer", action="append", default=[], help="Explainer (repeatable; default: config)")
    p.set_defaults(func=cmd_eval_consistency)

    p = sub.add_parser("eval-robustness", help="Robustness protocol (trains or loads the swapped twin)")
    _common(p)
    p.add_argument("--dataset", type=str, default=None, help="Canonical dataset file")
    p.add_argument("--checkpoint", type=str, default=None, help="Plain checkpoint")
    p.add_argument("--swapped-checkpoint", type=str, default=None, help="Swapped-twin checkpoint")
    p.add_argument("--arch", type=str, default=None, help="Architecture when training both twins")
    p.add_argument("--swap", type=str, default=None, help="Rows i,j to swap (default: per config)")
    p.add_argument("--explainer", action="append", default=[], help="Explainer (repeatable; default: config)")
    p.set_defaults(func=cmd_eval_robustness)

    p = sub.add_parser("report", help="Render tables from a records CSV or row sums of a map file")
    _common(p)
    p.add_argument("--records", type=str, default=None, help="Records CSV")
    p.add_argument("--from-map", type=str, default=None, help="Saliency map file")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", help="Full experiment matrix into a report bundle")
    _common(p)
    p.set_defaults(func=cmd_run)

    return parser.parse_args(argv)


def main(argv: list[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        configure_logging(args.log_level)
        args.func(args)
    except AuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except IndexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
