"""Image-informed open-vocabulary segmenter: FoodLearner, fusion and a SAN-lite mask head."""

import json
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from food_vocab_seg.encoders import VisualEmbedding
from food_vocab_seg.errors import ShapeError
from food_vocab_seg.foodlearner import FoodLearner
from food_vocab_seg.numcore import (
    LayerNorm,
    Linear,
    Module,
    Parameter,
    RngState,
    Tensor,
    TransformerBlock,
    concat,
    l2_normalize,
    matmul,
    resize_bilinear,
    softmax,
)
from food_vocab_seg.segmentation.models import ImageInformedEmbedding, ProposalSet, Stage2Config
from food_vocab_seg.segmentation.text import fuse, pool_queries

logger = logging.getLogger(__name__)

ARCHIVE_PREFIX = "stage2"


def proposal_class_logits(
    proposals: Tensor,
    fused: Tensor,
    tau: float,
    no_object_logits: Optional[Tensor] = None,
) -> Tensor:
    """``tau * cos(proposal, class)`` per class, with the no-object logit appended last.

    Args:
        proposals: [N_p, d] or [B, N_p, d]
        fused: [C, d] or [B, C, d] class embeddings
        tau: Temperature
        no_object_logits: [.., N_p, 1]; zeros when absent

    Returns:
        Logits of shape [.., N_p, C + 1]
    """
    if proposals.shape[-1] != fused.shape[-1]:
        raise ShapeError(f"proposal width {proposals.shape[-1]} differs from class width {fused.shape[-1]}")
    cos = matmul(l2_normalize(proposals), l2_normalize(fused).swapaxes(-1, -2))
    if no_object_logits is None:
        no_object_logits = Tensor(np.zeros(cos.shape[:-1] + (1,)))
    return concat([cos * tau, no_object_logits], axis=-1)


def classify_proposals(
    proposals: Tensor,
    fused: Tensor,
    tau: float,
    no_object_logits: Optional[Tensor] = None,
) -> Tensor:
    """Class distribution over C real classes plus no-object, rows summing to one."""
    return softmax(proposal_class_logits(proposals, fused, tau, no_object_logits), axis=-1)


class SanLiteHead(Module):
    """Proposal tokens that read patch features through learned-bias cross-attention.

    Each block runs self-attention over proposals, cross-attention to the
    projected patch features with an additive [N_p, P] bias, then a
    feed-forward layer. Masks are dot products between proposal embeddings
    and per-patch features, bilinearly upsampled to the mask resolution.
    """

    def __init__(self, d_visual: int, d_text: int, grid: Tuple[int, int], config: Stage2Config, rng: RngState):
        dim = config.head_dim
        n_patches = grid[0] * grid[1]
        self.grid = grid
        self.mask_size = config.mask_size
        self.proposal_tokens = Parameter(rng.child("proposal_tokens").normal((config.n_proposals, dim), 1.0))
        self.feature_proj = Linear(d_visual, dim, rng.child("feature_proj"))
        self.feature_norm = LayerNorm(dim)
        self.attn_bias = [Parameter(np.zeros((config.n_proposals, n_patches))) for _ in range(config.head_layers)]
        self.blocks = [
            TransformerBlock(dim, config.head_heads, rng.child(f"block{i}"), mlp_ratio=2, context_dim=dim)
            for i in range(config.head_layers)
        ]
        self.norm = LayerNorm(dim)
        self.mask_embed = Linear(dim, dim, rng.child("mask_embed"))
        self.pixel_proj = Linear(dim, dim, rng.child("pixel_proj"))
        self.class_proj = Linear(dim, d_text, rng.child("class_proj"))
        self.no_object = Linear(dim, 1, rng.child("no_object"))

    def __call__(self, visual_tokens: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        """Run the head over batched patch tokens [B, P, d_v].

        Returns:
            Tuple of (class embeddings [B, N_p, d], no-object logits [B, N_p, 1],
            mask logits [B, N_p, mask_size, mask_size])
        """
        batch, n_patches, _ = visual_tokens.shape
        if n_patches != self.grid[0] * self.grid[1]:
            raise ShapeError(f"head built for a {self.grid} grid, got {n_patches} patches")
        features = self.feature_norm(self.feature_proj(visual_tokens))
        n_p, dim = self.proposal_tokens.shape
        x = self.proposal_tokens.reshape(1, n_p, dim) + Tensor(np.zeros((batch, 1, 1)))
        for block, bias in zip(self.blocks, self.attn_bias):
            x = block(x, context=features, cross_bias=bias)
        x = self.norm(x)

        logits = matmul(self.mask_embed(x), self.pixel_proj(features).swapaxes(-1, -2))
        logits = logits.reshape(batch, n_p, *self.grid)
        masks = resize_bilinear(logits, self.mask_size, self.mask_size)
        return self.class_proj(x), self.no_object(x), masks


class OpenVocabSegmenter(Module):
    """Classifies mask proposals against image-informed class embeddings.

    Trainable parts are FoodLearner, the fusion projection and the head;
    the encoders stay frozen outside this module.
    """

    def __init__(
        self,
        foodlearner: FoodLearner,
        d_text: int,
        grid: Tuple[int, int],
        config: Stage2Config,
        rng: RngState,
    ):
        """Initialize the segmenter.

        Args:
            foodlearner: Learner, random or loaded from Stage I
            d_text: Width of the frozen text embeddings
            grid: Patch grid of the image encoder
            config: Head sizes and temperature
            rng: Stream for initialisation of the new parts
        """
        self.foodlearner = foodlearner
        self.fusion_proj = Linear(foodlearner.config.d_query, d_text, rng.child("fusion_proj"))
        self.head = SanLiteHead(foodlearner.d_visual, d_text, grid, config, rng.child("head"))
        self.config = config
        self.d_text = d_text
        self.grid = grid

    def image_informed(self, visual: VisualEmbedding, e_static: np.ndarray) -> ImageInformedEmbedding:
        """Build ~E_text = pooled(FL(E_visual, T_query)) + E_text for every image and class."""
        if not visual.batched:
            raise ShapeError("image_informed expects a batched visual embedding")
        batch = visual.tokens.shape[0]
        static = Tensor(np.asarray(e_static, dtype=np.float64))
        if self.config.static_text:
            e_hat = Tensor(np.zeros((batch, self.d_text)))
        else:
            e_hat = pool_queries(self.foodlearner.encode_queries(visual), self.fusion_proj)
        fused = fuse(e_hat.reshape(batch, 1, self.d_text), static.reshape(1, *static.shape))
        return ImageInformedEmbedding(e_hat=e_hat, e_static=static, e_fused=fused)

    def __call__(self, visual: VisualEmbedding, e_static: np.ndarray) -> Tuple[ImageInformedEmbedding, ProposalSet]:
        """Forward a batch of images against ``C`` classes.

        Args:
            visual: Batched visual embedding [B, P, d_v]
            e_static: [C, d] static class embeddings

        Returns:
            Tuple of (ImageInformedEmbedding, ProposalSet)
        """
        embedding = self.image_informed(visual, e_static)
        class_tokens, no_object, masks = self.head(visual.tokens)
        logits = proposal_class_logits(class_tokens, embedding.e_fused, self.config.tau, no_object)
        return embedding, ProposalSet(tokens=class_tokens, mask_logits=masks, class_logits=logits)

    def predict_masks(self, visual: VisualEmbedding) -> Tensor:
        """Mask logits [B, N_p, h, w] alone."""
        return self.head(visual.tokens)[2]

    def archive_header(self) -> Dict[str, str]:
        header = dict(self.foodlearner.archive_header())
        header.update({
            "stage": "2",
            "stage2_config": self.config.model_dump_json(),
            "d_text": str(self.d_text),
            "grid": json.dumps(list(self.grid)),
        })
        return header
