"""Command-line entry point for the food segmentation pipeline."""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from food_vocab_seg import __version__
from food_vocab_seg.cli import (
    ErrorResponse,
    RunConfig,
    cmd_aggregate,
    cmd_eval,
    cmd_gen_data,
    cmd_infer,
    cmd_pretrain,
    cmd_pretrain_clip,
    cmd_train_seg,
)
from food_vocab_seg.errors import ConfigError, FoodSegError
from food_vocab_seg.logging_config import configure_logging
from food_vocab_seg.metrics import format_aggregate, format_table
from food_vocab_seg.pretrain import LossToggles

logger = logging.getLogger(__name__)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config; omitted keys keep their defaults")
    common.add_argument("--seed", type=int, help="Root seed of every random stream")
    common.add_argument("--out", help="Output directory (the dataset directory for gen-data)")
    common.add_argument("--data", help="Dataset directory")
    common.add_argument("--force", action="store_true", help="Replace an existing output directory")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subcommand per pipeline step."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="food-vocab-seg",
        description="Open-vocabulary food segmentation with image-informed text embeddings",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", parents=[common], help="Generate the synthetic dataset")
    gen.add_argument("--classes", type=int, help="Ingredient classes, background excluded")
    gen.add_argument("--samples", type=int, help="Stage-II training images")
    gen.add_argument("--fraction-novel", type=float, help="Share of classes held out as novel")

    commands.add_parser("pretrain-clip", parents=[common], help="Align and freeze the toy encoders")

    pretrain = commands.add_parser("pretrain", parents=[common], help="Stage I: train FoodLearner")
    pretrain.add_argument("--loss-toggles", help="Comma list of enabled losses, e.g. itc,itm")
    pretrain.add_argument("--hard-negatives", action="store_true", help="Most ITC-similar wrong caption as ITM negative")
    pretrain.add_argument("--steps", type=int, help="Total Stage-I steps")
    pretrain.add_argument("--resume", help="Stage-I archive to continue from")

    train_seg = commands.add_parser("train-seg", parents=[common], help="Stage II: train the segmenter")
    train_seg.add_argument("--static-text", action="store_true", help="Static text-embedding baseline")
    train_seg.add_argument("--no-stage1", action="store_true", help="Random FoodLearner instead of Stage I")
    train_seg.add_argument("--templates", help="Preset name or comma list of templates containing {}")
    train_seg.add_argument("--split", help="Split file")
    train_seg.add_argument("--full-class", action="store_true", help="Train on every class")
    train_seg.add_argument("--steps", type=int, help="Stage-II steps")

    infer = commands.add_parser("infer", parents=[common], help="Segment images with any class list")
    infer.add_argument("--image", nargs="+", required=True, help="Image files")
    infer.add_argument("--classes", help="Comma list of class names; defaults to the checkpoint's classes")
    infer.add_argument("--checkpoint", help="Stage-II archive")

    evaluate = commands.add_parser("eval", parents=[common], help="Score a checkpoint on the eval subset")
    evaluate.add_argument("--checkpoint", help="Stage-II archive")
    evaluate.add_argument("--split", help="Split file")
    evaluate.add_argument("--full-class", action="store_true", help="Score without a held-out set")
    evaluate.add_argument("--include-background", action="store_true", help="Score background pixels too")

    aggregate = commands.add_parser("aggregate", parents=[common], help="Combine several eval reports")
    aggregate.add_argument("reports", nargs="+", help="report.json files")
    return parser


def _comma_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _templates(text: str) -> Union[str, List[str]]:
    items = _comma_list(text)
    return items[0] if len(items) == 1 else items


def apply_overrides(run: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Layer command-line flags over a loaded config and re-validate.

    Raises:
        ConfigError: If a flag value cannot be parsed
        ValidationError: If an override leaves a value out of range
    """
    data: Dict[str, Any] = run.model_dump()

    def flag(name: str) -> Any:
        return getattr(args, name, None)

    if flag("seed") is not None:
        data["seed"] = args.seed
    if flag("data"):
        data["paths"]["data"] = args.data
    if flag("out"):
        data["paths"]["data" if args.command == "gen-data" else "out"] = args.out
    if flag("split"):
        data["paths"]["split"] = args.split
    if flag("checkpoint"):
        data["paths"]["stage2"] = args.checkpoint
    if flag("full_class"):
        data["full_class"] = True
    if flag("include_background"):
        data["include_background"] = True

    if flag("classes") is not None and args.command == "gen-data":
        data["datagen"]["n_classes"] = args.classes
    if flag("samples") is not None:
        data["datagen"]["n_train"] = args.samples
    if flag("fraction_novel") is not None:
        data["datagen"]["fraction_novel"] = args.fraction_novel

    if args.command == "pretrain":
        if flag("loss_toggles"):
            try:
                data["stage1"]["loss_toggles"] = LossToggles.parse(args.loss_toggles).model_dump()
            except ValueError as e:
                raise ConfigError(f"--loss-toggles: {e}") from e
        if flag("hard_negatives"):
            data["stage1"]["itm_hard_negatives"] = True
        if flag("steps") is not None:
            data["stage1"]["steps"] = args.steps

    if args.command == "train-seg":
        if flag("static_text"):
            data["stage2"]["static_text"] = True
        if flag("no_stage1"):
            data["no_stage1"] = True
        if flag("templates"):
            data["stage2"]["templates"] = _templates(args.templates)
        if flag("steps") is not None:
            data["stage2"]["steps"] = args.steps

    return RunConfig.model_validate(data)


def load_run_config(args: argparse.Namespace) -> RunConfig:
    run = RunConfig.from_file(args.config) if args.config else RunConfig()
    return apply_overrides(run, args)


def run_command(run: RunConfig, args: argparse.Namespace) -> str:
    """Execute one subcommand and return what it prints on stdout."""
    if args.command == "gen-data":
        return str(cmd_gen_data(run, force=args.force))
    if args.command == "pretrain-clip":
        return cmd_pretrain_clip(run).model_dump_json(indent=2)
    if args.command == "pretrain":
        return cmd_pretrain(run, resume=args.resume).model_dump_json(indent=2)
    if args.command == "train-seg":
        return cmd_train_seg(run).model_dump_json(indent=2)
    if args.command == "infer":
        classes = _comma_list(args.classes) if args.classes else None
        return "\n".join(str(path) for path in cmd_infer(run, args.image, classes))
    if args.command == "eval":
        return format_table(cmd_eval(run))
    if args.command == "aggregate":
        return format_aggregate(cmd_aggregate(run, args.reports))
    raise ConfigError(f"Unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the application.

    Returns:
        Process exit code: 0 on success, 1 with an ErrorResponse on stderr otherwise
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)

    try:
        run = load_run_config(args)
        logger.info(f"Running {args.command} with seed {run.seed}")
        output = run_command(run, args)
    except (FoodSegError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(ErrorResponse.from_exception(e).model_dump_json(), file=sys.stderr)
        return 1

    if output:
        print(output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
