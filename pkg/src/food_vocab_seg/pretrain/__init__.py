"""Stage I: contrastive, matching and captioning pre-training of FoodLearner."""

from food_vocab_seg.pretrain.losses import (
    hard_negatives,
    itc_loss,
    itc_similarity,
    itm_loss,
    lm_loss,
    pooled_text,
    sample_negatives,
)
from food_vocab_seg.pretrain.models import (
    ItcConfig,
    ItmCandidates,
    LossBundle,
    LossToggles,
    PairBatch,
    RetrievalReport,
    Stage1Config,
)
from food_vocab_seg.pretrain.trainer import (
    LossRecord,
    Stage1Model,
    Stage1Report,
    Stage1Trainer,
    itc_retrieval,
    load_stage1_foodlearner,
)

__all__ = [
    "ItcConfig",
    "ItmCandidates",
    "LossBundle",
    "LossRecord",
    "LossToggles",
    "PairBatch",
    "RetrievalReport",
    "Stage1Config",
    "Stage1Model",
    "Stage1Report",
    "Stage1Trainer",
    "hard_negatives",
    "itc_loss",
    "itc_similarity",
    "itc_retrieval",
    "itm_loss",
    "lm_loss",
    "load_stage1_foodlearner",
    "pooled_text",
    "sample_negatives",
]
