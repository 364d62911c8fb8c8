"""Patch-embedding transformer standing in for a frozen CLIP image encoder."""

import logging
from typing import Tuple

import numpy as np

from food_vocab_seg.encoders.models import EncoderConfig, VisualEmbedding
from food_vocab_seg.errors import ShapeError
from food_vocab_seg.numcore import (
    LayerNorm,
    Linear,
    Module,
    Parameter,
    RngState,
    Tensor,
    TransformerBlock,
    resize_bilinear,
)

logger = logging.getLogger(__name__)


def normalize_pixels(images: np.ndarray) -> np.ndarray:
    """Map uint8 RGB (or floats in [0, 1]) to roughly zero-mean floats."""
    images = np.asarray(images)
    scaled = images.astype(np.float64) / 255.0 if images.dtype == np.uint8 else images.astype(np.float64)
    return (scaled - 0.5) / 0.5


def patchify(images: np.ndarray, patch: int) -> Tuple[np.ndarray, Tuple[int, int]]:
    """Cut [B, H, W, 3] images into [B, P, patch*patch*3] row-major patches.

    Raises:
        ShapeError: If H or W is not a multiple of ``patch``
    """
    if images.ndim != 4 or images.shape[-1] != 3:
        raise ShapeError(f"expected [B, H, W, 3] images, got {images.shape}")
    batch, height, width, _ = images.shape
    if height % patch or width % patch:
        raise ShapeError(f"resolution {height}x{width} is not divisible by patch size {patch}")
    gh, gw = height // patch, width // patch
    patches = images.reshape(batch, gh, patch, gw, patch, 3).transpose(0, 1, 3, 2, 4, 5)
    return patches.reshape(batch, gh * gw, patch * patch * 3), (gh, gw)


class ImageEncoder(Module):
    """ViT-style encoder: linear patch embedding, learned positions, pre-norm blocks."""

    def __init__(self, config: EncoderConfig, rng: RngState):
        self.patch_size = config.patch_size
        self.grid = (config.image_size // config.patch_size,) * 2
        dim = config.d_visual

        self.patch_embed = Linear(config.patch_size ** 2 * 3, dim, rng.child("patch_embed"))
        self.pos_embed = Parameter(rng.child("pos_embed").normal((self.grid[0] * self.grid[1], dim), 0.02))
        self.blocks = [
            TransformerBlock(dim, config.heads, rng.child(f"block{i}"), mlp_ratio=config.mlp_ratio)
            for i in range(config.layers)
        ]
        self.norm = LayerNorm(dim)
        self.proj = Linear(dim, config.d_text, rng.child("proj"))

    def _positions(self, grid: Tuple[int, int]) -> Tensor:
        if grid == self.grid:
            return self.pos_embed
        dim = self.pos_embed.shape[-1]
        table = self.pos_embed.reshape(*self.grid, dim).transpose(2, 0, 1)
        return resize_bilinear(table, *grid).transpose(1, 2, 0).reshape(grid[0] * grid[1], dim)

    def embed_patches(self, images: np.ndarray) -> Tuple[Tensor, Tuple[int, int]]:
        """Layer-0 tokens: patch projection plus positions, before any attention."""
        pixels = normalize_pixels(images)
        patches, grid = patchify(pixels, self.patch_size)
        return self.patch_embed(Tensor(patches)) + self._positions(grid), grid

    def __call__(self, images: np.ndarray) -> VisualEmbedding:
        """Encode a batch [B, H, W, 3] or a single image [H, W, 3]."""
        images = np.asarray(images)
        single = images.ndim == 3
        if single:
            images = images[None]
        tokens, grid = self.embed_patches(images)
        for block in self.blocks:
            tokens = block(tokens)
        tokens = self.norm(tokens)
        if single:
            tokens = tokens[0]
        return VisualEmbedding(tokens=tokens, source_resolution=images.shape[1:3], grid=grid)

    def pooled(self, visual: VisualEmbedding) -> Tensor:
        """Global image embedding of width d: mean patch token, then projection."""
        axis = 1 if visual.batched else 0
        return self.proj(visual.tokens.mean(axis=axis))
