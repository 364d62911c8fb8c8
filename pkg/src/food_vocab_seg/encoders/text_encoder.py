"""Causal transformer standing in for a frozen CLIP text encoder."""

import logging

import numpy as np

from food_vocab_seg.encoders.models import EncoderConfig, TextBatch
from food_vocab_seg.errors import ShapeError
from food_vocab_seg.numcore import Embedding, LayerNorm, Linear, Module, Parameter, RngState, Tensor, TransformerBlock

logger = logging.getLogger(__name__)


def causal_key_mask(pad_mask: np.ndarray) -> np.ndarray:
    """[B, L, L] mask: position i sees real positions j <= i."""
    length = pad_mask.shape[1]
    causal = np.tril(np.ones((length, length), dtype=bool))
    return causal[None, :, :] & ~pad_mask[:, None, :]


class TextEncoder(Module):
    """Token + position embeddings, causal blocks, EOS pooling, projection to d."""

    def __init__(self, vocab_size: int, config: EncoderConfig, rng: RngState):
        dim = config.d_text
        self.max_length = config.max_text_len
        self.token_embed = Embedding(vocab_size, dim, rng.child("token_embed"))
        self.pos_embed = Parameter(rng.child("pos_embed").normal((config.max_text_len, dim), 0.01))
        self.blocks = [
            TransformerBlock(dim, config.heads, rng.child(f"block{i}"), mlp_ratio=config.mlp_ratio)
            for i in range(config.layers)
        ]
        self.norm = LayerNorm(dim)
        self.proj = Linear(dim, dim, rng.child("proj"))

    def __call__(self, batch: TextBatch) -> Tensor:
        """Return pooled embeddings of shape [B, d], read at each row's EOS position."""
        if batch.max_length > self.max_length:
            raise ShapeError(f"batch length {batch.max_length} exceeds encoder max {self.max_length}")
        x = self.token_embed(batch.token_ids) + self.pos_embed[: batch.max_length]
        allowed = causal_key_mask(batch.pad_mask)
        for block in self.blocks:
            x = block(x, allowed=allowed)
        x = self.norm(x)
        pooled = x[np.arange(batch.batch_size), batch.eos_positions]
        return self.proj(pooled)
