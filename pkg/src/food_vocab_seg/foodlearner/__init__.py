"""FoodLearner: query tokens that read visual knowledge for text."""

from food_vocab_seg.foodlearner.model import ARCHIVE_PREFIX, FoodLearner
from food_vocab_seg.foodlearner.models import (
    BIDIRECTIONAL,
    CAUSAL,
    UNIMODAL,
    AttentionRegime,
    EnrichedTokens,
    FoodLearnerConfig,
    QueryTokens,
    RegimeMode,
    TokenKind,
)

__all__ = [
    "ARCHIVE_PREFIX",
    "AttentionRegime",
    "BIDIRECTIONAL",
    "CAUSAL",
    "EnrichedTokens",
    "FoodLearner",
    "FoodLearnerConfig",
    "QueryTokens",
    "RegimeMode",
    "TokenKind",
    "UNIMODAL",
]
