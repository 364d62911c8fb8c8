"""Minimal dense-tensor engine with reverse-mode differentiation."""

from food_vocab_seg.numcore.archive import load_archive, save_archive, strip_prefix, with_prefix
from food_vocab_seg.numcore.functional import (
    cosine_similarity,
    cross_entropy,
    l2_normalize,
    layer_norm,
    nll_from_log_probs,
    resize_bilinear,
    resize_matrix,
)
from food_vocab_seg.numcore.gradcheck import GradCheckReport, finite_diff_check
from food_vocab_seg.numcore.nn import (
    Embedding,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    TransformerBlock,
)
from food_vocab_seg.numcore.optim import AdamW, poly_lr, warmup_cosine_lr
from food_vocab_seg.numcore.rng import RngState
from food_vocab_seg.numcore.tensor import (
    Tensor,
    as_tensor,
    concat,
    is_grad_enabled,
    log_softmax,
    matmul,
    no_grad,
    softmax,
    stack,
)

__all__ = [
    "AdamW",
    "Embedding",
    "FeedForward",
    "GradCheckReport",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "Parameter",
    "RngState",
    "Tensor",
    "TransformerBlock",
    "as_tensor",
    "concat",
    "cosine_similarity",
    "cross_entropy",
    "finite_diff_check",
    "is_grad_enabled",
    "l2_normalize",
    "layer_norm",
    "load_archive",
    "log_softmax",
    "matmul",
    "nll_from_log_probs",
    "no_grad",
    "poly_lr",
    "resize_bilinear",
    "resize_matrix",
    "save_archive",
    "softmax",
    "stack",
    "strip_prefix",
    "warmup_cosine_lr",
    "with_prefix",
]
