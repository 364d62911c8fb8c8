"""Data models for the frozen image and text encoders."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from food_vocab_seg.errors import ShapeError, TokenizerError
from food_vocab_seg.numcore import Tensor


@dataclass(frozen=True)
class VisualEmbedding:
    """Patch tokens of one image ([P, d_v]) or a batch of images ([B, P, d_v])."""
    tokens: Tensor
    source_resolution: Tuple[int, int]
    grid: Tuple[int, int]

    @property
    def num_patches(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def batched(self) -> bool:
        return self.tokens.ndim == 3


@dataclass(frozen=True)
class TextBatch:
    """Token ids padded to a common length; ``pad_mask`` is True at padding."""
    token_ids: np.ndarray
    pad_mask: np.ndarray
    vocab_size: int

    def __post_init__(self):
        if self.token_ids.shape != self.pad_mask.shape or self.token_ids.ndim != 2:
            raise ShapeError(f"token_ids {self.token_ids.shape} and pad_mask {self.pad_mask.shape} must be equal 2-D")
        if self.token_ids.size and int(self.token_ids.max()) >= self.vocab_size:
            raise TokenizerError("token id outside the vocabulary")

    @property
    def batch_size(self) -> int:
        return self.token_ids.shape[0]

    @property
    def max_length(self) -> int:
        return self.token_ids.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return (~self.pad_mask).sum(axis=1)

    @property
    def eos_positions(self) -> np.ndarray:
        """Index of the last real token (EOS) of every row."""
        return self.lengths - 1

    def select(self, rows: np.ndarray) -> "TextBatch":
        rows = np.asarray(rows, dtype=np.int64)
        return TextBatch(self.token_ids[rows], self.pad_mask[rows], self.vocab_size)


@dataclass(frozen=True)
class TextEmbedding:
    """Pooled embedding of one prompt, shape [d]."""
    value: Tensor


class EncoderConfig(BaseModel):
    """Sizes of the toy image and text encoders."""
    model_config = ConfigDict(extra="forbid")

    image_size: int = Field(64, gt=0, description="Square input resolution in pixels")
    patch_size: int = Field(8, gt=0, description="Patch edge in pixels")
    d_visual: int = Field(64, gt=0, description="Width of patch tokens (d_v)")
    d_text: int = Field(64, gt=0, description="Shared text/fusion embedding width (d)")
    layers: int = Field(2, gt=0, description="Transformer blocks per encoder")
    heads: int = Field(4, gt=0, description="Attention heads")
    mlp_ratio: int = Field(2, gt=0, description="Feed-forward expansion")
    max_text_len: int = Field(24, gt=2, description="Longest tokenised prompt incl. BOS/EOS")

    @model_validator(mode="after")
    def _check_divisible(self) -> "EncoderConfig":
        if self.image_size % self.patch_size != 0:
            raise ValueError(f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}")
        return self


class ClipTrainConfig(BaseModel):
    """Contrastive alignment of the toy encoders before they are frozen."""
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(600, ge=0, description="Optimizer steps")
    batch_size: int = Field(32, ge=2, description="Pairs per step")
    lr: float = Field(1e-3, gt=0, description="Peak learning rate")
    warmup_steps: int = Field(50, ge=0, description="Linear warmup steps")
    weight_decay: float = Field(0.05, ge=0, description="Decoupled weight decay")
    temperature: float = Field(0.07, gt=0, description="Softmax temperature of the contrastive logits")
    heldout: int = Field(16, ge=2, description="Held-out pairs for recall@1")
    min_recall: float = Field(0.9, ge=0, le=1, description="Recall@1 that counts as converged")
    strict: bool = Field(False, description="Raise instead of warning when not converged")


class ClipPretrainReport(BaseModel):
    """Outcome of toy encoder alignment."""
    steps: int = Field(..., ge=0)
    final_loss: Optional[float] = Field(None, description="Contrastive loss at the last step; None without training")
    recall_at_1: float = Field(..., ge=0, le=1, description="Held-out image-to-text recall@1")
    chance: float = Field(..., ge=0, le=1, description="Recall@1 of a random ranking")
    converged: bool = Field(..., description="recall_at_1 >= min_recall")
