"""Stage II: image-informed text embeddings driving open-vocabulary segmentation."""

from food_vocab_seg.segmentation.inference import segment_image, segment_images, segment_many, write_prediction
from food_vocab_seg.segmentation.losses import (
    dice_cost_matrix,
    dice_loss,
    hungarian_assignment,
    match_proposals,
    matching_cost,
    stage2_loss,
)
from food_vocab_seg.segmentation.model import (
    OpenVocabSegmenter,
    SanLiteHead,
    classify_proposals,
    proposal_class_logits,
)
from food_vocab_seg.segmentation.models import (
    ImageInformedEmbedding,
    MatchResult,
    ProposalSet,
    SegTargets,
    Stage2Config,
    Stage2Report,
    nearest_resize,
)
from food_vocab_seg.segmentation.text import build_prompts, build_text_tokens, fuse, pool_queries, static_embeddings
from food_vocab_seg.segmentation.trainer import Stage2Checkpoint, Stage2Trainer, foreground, load_segmenter

__all__ = [
    "ImageInformedEmbedding",
    "MatchResult",
    "OpenVocabSegmenter",
    "ProposalSet",
    "SanLiteHead",
    "SegTargets",
    "Stage2Checkpoint",
    "Stage2Config",
    "Stage2Report",
    "Stage2Trainer",
    "build_prompts",
    "build_text_tokens",
    "classify_proposals",
    "dice_cost_matrix",
    "dice_loss",
    "foreground",
    "fuse",
    "hungarian_assignment",
    "load_segmenter",
    "match_proposals",
    "matching_cost",
    "nearest_resize",
    "pool_queries",
    "proposal_class_logits",
    "segment_image",
    "segment_images",
    "segment_many",
    "stage2_loss",
    "static_embeddings",
    "write_prediction",
]
