"""Symmetric contrastive alignment of the toy encoders before freezing."""

import logging
from typing import Sequence

import numpy as np

from food_vocab_seg.encoders.clip import ToyClip
from food_vocab_seg.encoders.models import ClipPretrainReport, ClipTrainConfig
from food_vocab_seg.errors import BatchError, ConvergenceError, NonFiniteError
from food_vocab_seg.numcore import (
    AdamW,
    RngState,
    Tensor,
    l2_normalize,
    log_softmax,
    matmul,
    no_grad,
    warmup_cosine_lr,
)

logger = logging.getLogger(__name__)


def caption_targets(captions: Sequence[str]) -> np.ndarray:
    """Row-stochastic targets spreading mass over rows sharing a caption."""
    captions = list(captions)
    same = np.array([[a == b for b in captions] for a in captions], dtype=np.float64)
    return same / same.sum(axis=1, keepdims=True)


def clip_contrastive_loss(
    image_embeddings: Tensor,
    text_embeddings: Tensor,
    captions: Sequence[str],
    temperature: float,
) -> Tensor:
    """Mean of image-to-text and text-to-image cross-entropy over cosine logits."""
    if image_embeddings.shape[0] < 2:
        raise BatchError("contrastive loss needs at least two pairs")
    images = l2_normalize(image_embeddings)
    texts = l2_normalize(text_embeddings)
    logits = matmul(images, texts.T) * (1.0 / temperature)
    targets = Tensor(caption_targets(captions))
    batch = image_embeddings.shape[0]
    image_to_text = -(log_softmax(logits, axis=1) * targets).sum() * (1.0 / batch)
    text_to_image = -(log_softmax(logits.T, axis=1) * targets).sum() * (1.0 / batch)
    return (image_to_text + text_to_image) * 0.5


def retrieval_recall_at_1(clip: ToyClip, images: np.ndarray, captions: Sequence[str]) -> float:
    """Share of images whose most similar caption equals their own caption."""
    with no_grad():
        image_emb = l2_normalize(clip.pooled_image(images)).numpy()
        text_emb = l2_normalize(clip.text_encoder(clip.tokenizer.batch(captions))).numpy()
    best = np.argmax(image_emb @ text_emb.T, axis=1)
    hits = [captions[j] == captions[i] for i, j in enumerate(best)]
    return float(np.mean(hits))


def pretrain_toy_clip(
    clip: ToyClip,
    images: np.ndarray,
    captions: Sequence[str],
    config: ClipTrainConfig,
    rng: RngState,
) -> ClipPretrainReport:
    """Align image and text encoders on (image, caption) pairs, then freeze them.

    The last ``config.heldout`` pairs are never trained on and score recall@1.

    Args:
        clip: Encoders to train in place
        images: uint8 array [N, H, W, 3]
        captions: N captions
        config: Optimisation settings
        rng: Stream for batch sampling

    Returns:
        ClipPretrainReport

    Raises:
        BatchError: If there are too few pairs
        ConvergenceError: If ``config.strict`` and recall stays below ``min_recall``
    """
    captions = list(captions)
    if len(captions) != len(images):
        raise BatchError(f"{len(images)} images but {len(captions)} captions")
    n_train = len(captions) - config.heldout
    if n_train < 2:
        raise BatchError(f"need more than {config.heldout + 1} pairs, got {len(captions)}")

    train_images, heldout_images = images[:n_train], images[n_train:]
    train_captions, heldout_captions = captions[:n_train], captions[n_train:]

    clip.unfreeze()
    params = list(clip.image_encoder.named_parameters("image")) + list(clip.text_encoder.named_parameters("text"))
    optimizer = AdamW(params, weight_decay=config.weight_decay)
    batch_size = min(config.batch_size, n_train)
    batch_rng = rng.child("batches")

    loss_value = float("nan")
    logger.info(f"Aligning toy encoders on {n_train} pairs for {config.steps} steps")
    for step in range(config.steps):
        rows = np.sort(batch_rng.choice(n_train, batch_size, replace=False))
        batch_captions = [train_captions[i] for i in rows]

        optimizer.zero_grad()
        try:
            loss = clip_contrastive_loss(
                clip.pooled_image(train_images[rows]),
                clip.text_encoder(clip.tokenizer.batch(batch_captions)),
                batch_captions,
                config.temperature,
            )
        except NonFiniteError:
            logger.error(f"Non-finite contrastive loss at step {step}")
            raise
        loss.backward()
        lr = warmup_cosine_lr(step, config.steps, config.warmup_steps, config.lr * 0.01, config.lr, config.lr * 0.1)
        optimizer.step(lr)
        loss_value = loss.item()

        if step % 50 == 0 or step == config.steps - 1:
            logger.info(f"clip step {step}: loss={loss_value:.4f} lr={lr:.2e}")

    clip.freeze()
    recall = retrieval_recall_at_1(clip, heldout_images, heldout_captions)
    chance = float(np.mean([
        sum(c == own for c in heldout_captions) / len(heldout_captions) for own in heldout_captions
    ]))
    report = ClipPretrainReport(
        steps=config.steps,
        final_loss=loss_value if config.steps else None,
        recall_at_1=recall,
        chance=chance,
        converged=recall >= config.min_recall,
    )
    if not report.converged:
        message = f"Toy encoders reached recall@1 {recall:.3f} < {config.min_recall:.3f}"
        logger.warning(message)
        if config.strict:
            raise ConvergenceError(message)
    else:
        logger.info(f"Toy encoders aligned: recall@1={recall:.3f} (chance {chance:.3f})")
    return report
