"""Toy frozen image/text encoders and tokenizer."""

from food_vocab_seg.encoders.clip import ToyClip
from food_vocab_seg.encoders.clip_pretrain import pretrain_toy_clip, retrieval_recall_at_1
from food_vocab_seg.encoders.models import (
    ClipPretrainReport,
    ClipTrainConfig,
    EncoderConfig,
    TextBatch,
    TextEmbedding,
    VisualEmbedding,
)
from food_vocab_seg.encoders.prompts import DEFAULT_TEMPLATE, TEMPLATE_PRESETS, resolve_templates
from food_vocab_seg.encoders.tokenizer import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Tokenizer

__all__ = [
    "BOS_ID",
    "ClipPretrainReport",
    "ClipTrainConfig",
    "DEFAULT_TEMPLATE",
    "EOS_ID",
    "EncoderConfig",
    "PAD_ID",
    "TEMPLATE_PRESETS",
    "TextBatch",
    "TextEmbedding",
    "Tokenizer",
    "ToyClip",
    "UNK_ID",
    "VisualEmbedding",
    "pretrain_toy_clip",
    "resolve_templates",
    "retrieval_recall_at_1",
]
