"""Command-line pipeline: data generation, both training stages, inference and evaluation."""

from food_vocab_seg.cli.commands import (
    cmd_aggregate,
    cmd_eval,
    cmd_gen_data,
    cmd_infer,
    cmd_pretrain,
    cmd_pretrain_clip,
    cmd_train_seg,
    load_clip,
)
from food_vocab_seg.cli.models import ErrorResponse, PathsConfig, RunConfig

__all__ = [
    "ErrorResponse",
    "PathsConfig",
    "RunConfig",
    "cmd_aggregate",
    "cmd_eval",
    "cmd_gen_data",
    "cmd_infer",
    "cmd_pretrain",
    "cmd_pretrain_clip",
    "cmd_train_seg",
    "load_clip",
]
