"""Stage-I objectives: contrastive, matching and captioning losses."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from food_vocab_seg.encoders.tokenizer import PAD_ID
from food_vocab_seg.errors import BatchError, ShapeError
from food_vocab_seg.numcore import (
    Linear,
    RngState,
    Tensor,
    as_tensor,
    l2_normalize,
    log_softmax,
    matmul,
    no_grad,
    softmax,
)
from food_vocab_seg.pretrain.models import ItcConfig, ItmCandidates, PairBatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ItcOutput:
    loss: Tensor
    similarity: np.ndarray
    p_t2i: np.ndarray
    p_i2t: np.ndarray


@dataclass(frozen=True)
class ItmOutput:
    loss: Tensor
    p_itm: np.ndarray


@dataclass(frozen=True)
class LmOutput:
    """Mean next-token loss plus the per-position terms ([B, W-1], 0 where excluded)."""
    loss: Tensor
    token_nll: np.ndarray
    valid: np.ndarray


def itc_similarity(enriched_queries: Tensor, enriched_text: Tensor, phi: float) -> Tensor:
    """phi * max over query tokens of cosine(query, text), shape [B_img, B_txt].

    Raises:
        ShapeError: If the inputs are not [B, Q, d] and [B', d] with equal d
    """
    queries, text = as_tensor(enriched_queries), as_tensor(enriched_text)
    if queries.ndim != 3 or text.ndim != 2 or queries.shape[-1] != text.shape[-1]:
        raise ShapeError(f"expected [B, Q, d] queries and [B, d] text, got {queries.shape} and {text.shape}")
    n_img, n_q, dim = queries.shape
    cos = matmul(l2_normalize(queries).reshape(n_img * n_q, dim), l2_normalize(text).T)
    return cos.reshape(n_img, n_q, text.shape[0]).max(axis=1) * phi


def itc_loss(enriched_queries: Tensor, enriched_text: Tensor, cfg: Optional[ItcConfig] = None) -> ItcOutput:
    """Symmetric image-text contrastive loss with max-over-queries similarity.

    Args:
        enriched_queries: [B, Q, d] query tokens of each image
        enriched_text: [B, d] pooled text embedding of each caption
        cfg: Temperature settings

    Returns:
        ItcOutput with ``loss = (CE_t2i + CE_i2t) / 2`` and both distributions

    Raises:
        BatchError: If B < 2
    """
    cfg = cfg or ItcConfig()
    batch = as_tensor(enriched_queries).shape[0]
    if batch < 2 or as_tensor(enriched_text).shape[0] != batch:
        raise BatchError(f"contrastive loss needs B >= 2 matching pairs, got {batch}")

    sim = itc_similarity(enriched_queries, enriched_text, cfg.phi)
    diag = (np.arange(batch), np.arange(batch))
    l_i2t = -log_softmax(sim, axis=1)[diag].mean()
    l_t2i = -log_softmax(sim, axis=0)[diag].mean()
    loss = (l_t2i + l_i2t) * 0.5
    return ItcOutput(
        loss=loss,
        similarity=sim.numpy(),
        p_t2i=softmax(sim.detach(), axis=0).numpy().T,
        p_i2t=softmax(sim.detach(), axis=1).numpy(),
    )


def itm_loss(multimodal_queries: Tensor, labels: np.ndarray, head: Linear) -> ItmOutput:
    """Binary matching loss on query-token probabilities averaged over Q.

    Args:
        multimodal_queries: [N, Q, d] query tokens of each candidate pair
        labels: [N] match bits
        head: Shared 2-logit classifier

    Raises:
        BatchError: If there is no negative candidate
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not np.any(labels == 0):
        raise BatchError("matching loss needs at least one negative candidate")
    if multimodal_queries.ndim != 3 or multimodal_queries.shape[0] != labels.shape[0]:
        raise ShapeError(f"queries {multimodal_queries.shape} do not fit {labels.shape[0]} labels")

    p_itm = softmax(head(multimodal_queries), axis=-1).mean(axis=1)
    loss = -p_itm[np.arange(labels.shape[0]), labels].log().mean()
    return ItmOutput(loss=loss, p_itm=p_itm.numpy())


def lm_loss(multimodal_text: Tensor, target_ids: np.ndarray, head: Linear) -> LmOutput:
    """Next-token cross-entropy; position w predicts token w+1, PAD targets skipped.

    Args:
        multimodal_text: [B, W, d] text tokens produced under causal attention
        target_ids: [B, W] token ids of the same text
        head: Vocabulary classifier d -> V

    Raises:
        BatchError: If every target position is padding
    """
    target_ids = np.asarray(target_ids, dtype=np.int64)
    if multimodal_text.ndim != 3 or multimodal_text.shape[:2] != target_ids.shape:
        raise ShapeError(f"text {multimodal_text.shape} does not fit targets {target_ids.shape}")
    targets = target_ids[:, 1:]
    valid = targets != PAD_ID
    if not valid.any():
        raise BatchError("every target position is padding")

    log_probs = log_softmax(head(multimodal_text[:, :-1]), axis=-1)
    rows, cols = np.nonzero(valid)
    picked = log_probs[rows, cols, targets[rows, cols]]

    token_nll = np.zeros(targets.shape)
    token_nll[rows, cols] = -picked.numpy()
    return LmOutput(loss=-picked.mean(), token_nll=token_nll, valid=valid)


def _wrong_caption_mask(batch: Union[PairBatch, Sequence[str], int]) -> np.ndarray:
    """[B, B] mask of captions usable as negatives: text differs from the row's own caption."""
    if isinstance(batch, (int, np.integer)):
        captions, batch_size = None, int(batch)
    else:
        captions = list(batch.captions if isinstance(batch, PairBatch) else batch)
        batch_size = len(captions)
    if batch_size < 2:
        raise BatchError(f"negative sampling needs B >= 2, got {batch_size}")
    if captions is None:
        return ~np.eye(batch_size, dtype=bool)
    text = np.array(captions, dtype=str)
    return text[:, None] != text[None, :]


def _candidates_from(wrong: np.ndarray, pick) -> ItmCandidates:
    rows = np.flatnonzero(wrong.any(axis=1))
    if rows.size == 0:
        raise BatchError("every caption in the batch is identical; no negative exists")
    if rows.size < wrong.shape[0]:
        logger.debug(f"{wrong.shape[0] - rows.size} rows have no distinct caption and get no negative")
    own = np.arange(wrong.shape[0])
    other = np.array([pick(row) for row in rows], dtype=np.int64)
    return ItmCandidates(
        image_index=np.concatenate([own, rows]),
        text_index=np.concatenate([own, other]),
        labels=np.concatenate([np.ones(own.size, dtype=np.int64), np.zeros(rows.size, dtype=np.int64)]),
    )


def sample_negatives(batch: Union[PairBatch, Sequence[str], int], rng: RngState) -> ItmCandidates:
    """Each image with its own caption (label 1) and one different in-batch caption (label 0).

    Args:
        batch: Pairs, their captions, or a batch size when every caption is distinct
        rng: Stream for the uniform choice among different captions

    Raises:
        BatchError: If B < 2 or every caption is identical
    """
    wrong = _wrong_caption_mask(batch)
    draws = rng.uniform((wrong.shape[0],))

    def pick(row: int) -> int:
        options = np.flatnonzero(wrong[row])
        return int(options[min(int(draws[row] * options.size), options.size - 1)])

    return _candidates_from(wrong, pick)


def hard_negatives(similarity: np.ndarray, captions: Optional[Sequence[str]] = None) -> ItmCandidates:
    """Like ``sample_negatives`` but pick the most similar different caption per image."""
    similarity = np.array(similarity, dtype=np.float64)
    wrong = _wrong_caption_mask(similarity.shape[0] if captions is None else captions)
    if wrong.shape != similarity.shape:
        raise ShapeError(f"similarity {similarity.shape} does not fit {wrong.shape[0]} captions")
    masked = np.where(wrong, similarity, -np.inf)
    return _candidates_from(wrong, lambda row: int(np.argmax(masked[row])))


def pooled_text(enriched_text: Tensor, eos_positions: np.ndarray) -> Tensor:
    """Enriched text tokens [B, W, d] pooled at each row's EOS position."""
    return enriched_text[np.arange(enriched_text.shape[0]), np.asarray(eos_positions, dtype=np.int64)]


def itc_similarity_matrix(enriched_queries: Tensor, enriched_text: Tensor, phi: float) -> np.ndarray:
    """Similarity matrix without recording a graph."""
    with no_grad():
        return itc_similarity(enriched_queries, enriched_text, phi).numpy()
