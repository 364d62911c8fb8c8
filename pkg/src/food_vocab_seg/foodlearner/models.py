"""Data models for the query-token transformer."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from food_vocab_seg.errors import RegimeError
from food_vocab_seg.numcore import Tensor


class TokenKind(str, Enum):
    ENRICHED_QUERY = "enriched_query"
    ENRICHED_TEXT = "enriched_text"
    MULTIMODAL_QUERY = "multimodal_query"
    MULTIMODAL_TEXT = "multimodal_text"


class RegimeMode(str, Enum):
    UNIMODAL = "unimodal"
    BIDIRECTIONAL_MULTIMODAL = "bidirectional_multimodal"
    CAUSAL_MULTIMODAL = "causal_multimodal"


@dataclass(frozen=True)
class QueryTokens:
    """The learnable [Q, d_q] token bank."""
    value: Tensor

    @property
    def count(self) -> int:
        return self.value.shape[0]


@dataclass(frozen=True)
class EnrichedTokens:
    """FoodLearner output tokens, [B, N, d_q] or [N, d_q]."""
    value: Tensor
    kind: TokenKind


@dataclass(frozen=True)
class AttentionRegime:
    """Which positions of a [query; text] sequence may attend to which."""
    mode: RegimeMode

    def mask(self, n_query: int, n_text: int, text_pad: Optional[np.ndarray] = None, batch: int = 1) -> np.ndarray:
        """Boolean [B, N, N] matrix, True where row i may attend to column j.

        Args:
            n_query: Number of leading query positions (the boundary)
            n_text: Number of trailing text positions
            text_pad: Optional [B, n_text] padding mask; padded keys are hidden
            batch: Batch size when ``text_pad`` is absent

        Raises:
            RegimeError: If a multimodal regime lacks queries or text
        """
        if self.mode is not RegimeMode.UNIMODAL and (n_query == 0 or n_text == 0):
            raise RegimeError(f"{self.mode.value} needs both query and text tokens, got {n_query} and {n_text}")
        if text_pad is not None:
            batch = text_pad.shape[0]
            if text_pad.shape[1] != n_text:
                raise RegimeError(f"padding mask covers {text_pad.shape[1]} positions, expected {n_text}")

        n = n_query + n_text
        allowed = np.zeros((n, n), dtype=bool)
        q, t = slice(0, n_query), slice(n_query, n)
        allowed[q, q] = True
        if self.mode is RegimeMode.UNIMODAL:
            allowed[t, t] = True
        elif self.mode is RegimeMode.BIDIRECTIONAL_MULTIMODAL:
            allowed[:, :] = True
        else:
            allowed[t, q] = True
            allowed[t, t] = np.tril(np.ones((n_text, n_text), dtype=bool))

        key_real = np.ones((batch, n), dtype=bool)
        if text_pad is not None:
            key_real[:, n_query:] = ~text_pad
        return allowed[None, :, :] & key_real[:, None, :]


UNIMODAL = AttentionRegime(RegimeMode.UNIMODAL)
BIDIRECTIONAL = AttentionRegime(RegimeMode.BIDIRECTIONAL_MULTIMODAL)
CAUSAL = AttentionRegime(RegimeMode.CAUSAL_MULTIMODAL)


class FoodLearnerConfig(BaseModel):
    """Sizes of the query-token transformer."""
    model_config = ConfigDict(extra="forbid")

    q_tokens: int = Field(8, gt=0, description="Number of query tokens Q")
    d_query: int = Field(64, gt=0, description="Token width d_q")
    layers: int = Field(2, gt=0, description="Transformer blocks, each with cross-attention")
    heads: int = Field(4, gt=0, description="Attention heads")
    mlp_ratio: int = Field(2, gt=0, description="Feed-forward expansion")
    query_init_std: float = Field(0.02, gt=0, description="Std of the Gaussian query-token initialisation")
    max_text_len: int = Field(24, gt=2, description="Longest text sequence incl. BOS/EOS")
