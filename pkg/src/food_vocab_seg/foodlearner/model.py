"""Query-token transformer that extracts image-specific knowledge for text."""

import logging
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from food_vocab_seg.encoders.models import TextBatch, VisualEmbedding
from food_vocab_seg.errors import ArchiveError, RegimeError, ShapeError
from food_vocab_seg.foodlearner.models import (
    BIDIRECTIONAL,
    CAUSAL,
    UNIMODAL,
    AttentionRegime,
    EnrichedTokens,
    FoodLearnerConfig,
    QueryTokens,
    TokenKind,
)
from food_vocab_seg.numcore import (
    Embedding,
    LayerNorm,
    Linear,
    Module,
    Parameter,
    RngState,
    Tensor,
    TransformerBlock,
    concat,
)

logger = logging.getLogger(__name__)

ARCHIVE_PREFIX = "foodlearner"


def _batched(tokens: Tensor) -> Tuple[Tensor, bool]:
    if tokens.ndim == 2:
        return tokens.reshape(1, *tokens.shape), True
    if tokens.ndim != 3:
        raise ShapeError(f"expected [N, d] or [B, N, d] tokens, got {tokens.shape}")
    return tokens, False


class FoodLearner(Module):
    """BERT-style blocks of self-attention, gated cross-attention and feed-forward.

    The input is a sequence of query tokens, text tokens or ``[query; text]``.
    Cross-attention to the projected visual embedding runs only when a visual
    input is given, and only for the leading query positions.
    """

    def __init__(self, vocab_size: int, d_visual: int, config: FoodLearnerConfig, rng: RngState):
        """Initialize the learner.

        Args:
            vocab_size: Size of the shared tokenizer vocabulary
            d_visual: Width of the image encoder's patch tokens
            config: Learner sizes
            rng: Stream for parameter initialisation
        """
        dim = config.d_query
        self.config = config
        self.vocab_size = vocab_size
        self.d_visual = d_visual
        self.query_tokens = Parameter(rng.child("query_tokens").normal((config.q_tokens, dim), config.query_init_std))
        self.visual_proj = Linear(d_visual, dim, rng.child("visual_proj"))
        self.word_embed = Embedding(vocab_size, dim, rng.child("word_embed"))
        self.pos_embed = Parameter(rng.child("pos_embed").normal((config.max_text_len, dim), 0.02))
        self.query_norm = LayerNorm(dim)
        self.text_norm = LayerNorm(dim)
        self.blocks = [
            TransformerBlock(dim, config.heads, rng.child(f"block{i}"), mlp_ratio=config.mlp_ratio, context_dim=dim)
            for i in range(config.layers)
        ]
        self.norm = LayerNorm(dim)

    @property
    def num_queries(self) -> int:
        return self.config.q_tokens

    @property
    def query_bank(self) -> QueryTokens:
        return QueryTokens(self.query_tokens)

    # --- input embeddings ---
    def embed_text(self, batch: TextBatch) -> Tensor:
        """Raw text tokens T_text, [B, W, d_q]."""
        if batch.max_length > self.config.max_text_len:
            raise ShapeError(f"text length {batch.max_length} exceeds {self.config.max_text_len}")
        return self.text_norm(self.word_embed(batch.token_ids) + self.pos_embed[: batch.max_length])

    def expand_queries(self, batch_size: int) -> Tensor:
        """The query bank repeated over a batch, [B, Q, d_q]."""
        q, dim = self.query_tokens.shape
        return self.query_norm(self.query_tokens.reshape(1, q, dim) + Tensor(np.zeros((batch_size, 1, 1))))

    # --- core transformer ---
    def fl_encode(
        self,
        visual: Optional[VisualEmbedding],
        tokens: Tensor,
        regime: AttentionRegime,
        boundary: int,
        text_pad: Optional[np.ndarray] = None,
    ) -> Tensor:
        """Run all blocks over ``tokens``; output length equals input length.

        Args:
            visual: Conditional visual embedding, or None to gate cross-attention off
            tokens: [N, d_q] or [B, N, d_q]; positions before ``boundary`` are queries
            regime: Attention regime for the self-attention layers
            boundary: Number of leading query positions
            text_pad: Optional [B, N - boundary] padding mask for the text part

        Returns:
            Tensor with the shape of ``tokens``

        Raises:
            RegimeError: If the regime or visual input does not fit the layout
        """
        x, single = _batched(tokens)
        batch, length, _ = x.shape
        if not 0 <= boundary <= length:
            raise RegimeError(f"boundary {boundary} outside sequence of length {length}")
        if visual is not None and boundary == 0:
            raise RegimeError("a visual input needs query positions to attend from")

        allowed = regime.mask(boundary, length - boundary, text_pad, batch=batch)
        context = None
        if visual is not None:
            context_tokens = visual.tokens if visual.batched else visual.tokens.reshape(1, *visual.tokens.shape)
            if context_tokens.shape[0] != batch:
                raise ShapeError(f"visual batch {context_tokens.shape[0]} does not match token batch {batch}")
            context = self.visual_proj(context_tokens)

        for block in self.blocks:
            x = block(x, allowed=allowed, context=context, cross_rows=boundary)
        x = self.norm(x)
        return x[0] if single else x

    # --- entry points used by the objectives ---
    def encode_queries(self, visual: VisualEmbedding) -> EnrichedTokens:
        """hat T_query = FL(E_visual, T_query), [B, Q, d_q] (or [Q, d_q] for one image)."""
        batch = visual.tokens.shape[0] if visual.batched else 1
        out = self.fl_encode(visual if visual.batched else _as_batch(visual), self.expand_queries(batch), UNIMODAL,
                             boundary=self.num_queries)
        return EnrichedTokens(out if visual.batched else out[0], TokenKind.ENRICHED_QUERY)

    def encode_text(self, batch: TextBatch) -> EnrichedTokens:
        """hat T_text = FL(NULL, T_text), [B, W, d_q]."""
        out = self.fl_encode(None, self.embed_text(batch), UNIMODAL, boundary=0, text_pad=batch.pad_mask)
        return EnrichedTokens(out, TokenKind.ENRICHED_TEXT)

    def concat_query_text(self, queries: EnrichedTokens, text: Tensor) -> Tuple[Tensor, int]:
        """Join ``[queries; text]`` along the sequence axis and return the boundary.

        Raises:
            ShapeError: If widths or batch sizes differ
        """
        q, _ = _batched(queries.value)
        t, _ = _batched(text)
        if q.shape[-1] != t.shape[-1] or q.shape[0] != t.shape[0]:
            raise ShapeError(f"cannot concatenate queries {q.shape} with text {t.shape}")
        return concat([q, t], axis=1), q.shape[1]

    def encode_matching(self, visual: VisualEmbedding, queries: EnrichedTokens, batch: TextBatch) -> EnrichedTokens:
        """tilde T_query = FL(E_visual, [hat T_query; T_text]) with bidirectional attention."""
        sequence, boundary = self.concat_query_text(queries, self.embed_text(batch))
        out = self.fl_encode(visual, sequence, BIDIRECTIONAL, boundary, text_pad=batch.pad_mask)
        return EnrichedTokens(out[:, :boundary], TokenKind.MULTIMODAL_QUERY)

    def encode_captioning(self, queries: EnrichedTokens, batch: TextBatch) -> EnrichedTokens:
        """tilde T_text = FL(NULL, [hat T_query; T_text]) with causal text attention."""
        sequence, boundary = self.concat_query_text(queries, self.embed_text(batch))
        out = self.fl_encode(None, sequence, CAUSAL, boundary, text_pad=batch.pad_mask)
        return EnrichedTokens(out[:, boundary:], TokenKind.MULTIMODAL_TEXT)

    # --- persistence ---
    def archive_header(self) -> Dict[str, str]:
        return {
            "q_tokens": str(self.config.q_tokens),
            "d_query": str(self.config.d_query),
            "foodlearner_config": self.config.model_dump_json(),
            "vocab_size": str(self.vocab_size),
            "d_visual": str(self.d_visual),
        }

    def check_header(self, header: Mapping[str, str]) -> None:
        """Validate Q and d_q recorded in an archive against this model.

        Raises:
            ArchiveError: On a mismatch
        """
        expected = {"q_tokens": self.config.q_tokens, "d_query": self.config.d_query}
        for key, value in expected.items():
            if key in header and int(header[key]) != value:
                raise ArchiveError(f"Archive {key}={header[key]} but model has {value}")


def _as_batch(visual: VisualEmbedding) -> VisualEmbedding:
    return VisualEmbedding(
        tokens=visual.tokens.reshape(1, *visual.tokens.shape),
        source_resolution=visual.source_resolution,
        grid=visual.grid,
    )
