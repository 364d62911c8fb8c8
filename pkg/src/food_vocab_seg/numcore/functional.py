"""Composite differentiable functions built on tensor primitives."""

import logging
from typing import Optional, Union

import numpy as np

from food_vocab_seg.errors import InvalidInputError, ShapeError
from food_vocab_seg.numcore.tensor import Tensor, as_tensor, log_softmax, matmul, softmax

logger = logging.getLogger(__name__)

__all__ = [
    "softmax",
    "log_softmax",
    "l2_normalize",
    "cosine_similarity",
    "cross_entropy",
    "nll_from_log_probs",
    "layer_norm",
    "resize_matrix",
    "resize_bilinear",
]

NORM_EPS = 1e-12


def l2_normalize(x: Tensor, axis: int = -1) -> Tensor:
    """Scale vectors along ``axis`` to unit Euclidean norm.

    Raises:
        InvalidInputError: If any vector has zero norm
    """
    x = as_tensor(x)
    squared = (x * x).sum(axis=axis, keepdims=True)
    if np.any(squared.data <= NORM_EPS ** 2):
        raise InvalidInputError("cannot normalise a zero-norm vector")
    return x / squared.sqrt()


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """Cosine of the angle between two vectors of equal length.

    Args:
        a: Tensor of shape [d]
        b: Tensor of shape [d]

    Returns:
        Single-value tensor in [-1, 1]

    Raises:
        ShapeError: If the shapes differ
        InvalidInputError: If either input has zero norm
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"cosine_similarity needs two equal 1-D vectors, got {a.shape} and {b.shape}")
    return (l2_normalize(a) * l2_normalize(b)).sum()


def cross_entropy(probs: Tensor, target: int) -> Tensor:
    """Negative log-probability of ``target`` under an explicit distribution.

    Args:
        probs: Tensor of shape [n], non-negative and summing to one
        target: Index of the true class

    Returns:
        Single-value tensor ``-log(probs[target])``

    Raises:
        InvalidInputError: If ``probs`` is not a distribution, the target has zero
            probability or the target is out of range
    """
    probs = as_tensor(probs)
    if probs.ndim != 1:
        raise ShapeError(f"cross_entropy expects a 1-D distribution, got {probs.shape}")
    if not 0 <= target < probs.shape[0]:
        raise InvalidInputError(f"target {target} out of range for {probs.shape[0]} classes")
    if np.any(probs.data < 0) or abs(float(probs.data.sum()) - 1.0) > 1e-9:
        raise InvalidInputError("probabilities must be non-negative and sum to 1")
    if probs.data[target] == 0:
        raise InvalidInputError(f"target {target} has zero probability")
    return -probs[target].log()


def nll_from_log_probs(
    log_probs: Tensor,
    targets: np.ndarray,
    weights: Optional[np.ndarray] = None,
) -> Tensor:
    """Weighted mean negative log-likelihood over rows.

    Args:
        log_probs: Tensor of shape [n, C]
        targets: Integer array of shape [n]
        weights: Optional per-row weights; the mean is normalised by their sum

    Returns:
        Single-value tensor
    """
    targets = np.asarray(targets, dtype=np.int64)
    if log_probs.ndim != 2 or targets.shape != (log_probs.shape[0],):
        raise ShapeError(f"log_probs {log_probs.shape} does not fit targets {targets.shape}")
    if np.any(targets < 0) or np.any(targets >= log_probs.shape[1]):
        raise InvalidInputError("target index out of range")
    picked = log_probs[np.arange(targets.shape[0]), targets]
    if weights is None:
        return -picked.mean()
    weights = np.asarray(weights, dtype=np.float64)
    return -(picked * weights).sum() * (1.0 / float(weights.sum()))


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean and unit variance, then scale and shift."""
    centered = x - x.mean(axis=-1, keepdims=True)
    variance = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / (variance + eps).sqrt() * gamma + beta


def resize_matrix(in_size: int, out_size: int) -> np.ndarray:
    """Bilinear interpolation weights of shape [out_size, in_size] (half-pixel centres)."""
    if in_size <= 0 or out_size <= 0:
        raise ShapeError("resize sizes must be positive")
    weights = np.zeros((out_size, in_size))
    scale = in_size / out_size
    for dst in range(out_size):
        src = max((dst + 0.5) * scale - 0.5, 0.0)
        low = min(int(np.floor(src)), in_size - 1)
        high = min(low + 1, in_size - 1)
        frac = src - low
        weights[dst, low] += 1.0 - frac
        weights[dst, high] += frac
    return weights


def resize_bilinear(x: Union[Tensor, np.ndarray], out_h: int, out_w: int) -> Tensor:
    """Resize the last two axes of ``x`` as a pair of matrix products."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"resize needs at least 2-D input, got {x.shape}")
    rows = Tensor(resize_matrix(x.shape[-2], out_h))
    cols = Tensor(resize_matrix(x.shape[-1], out_w).T)
    return matmul(matmul(rows, x), cols)
