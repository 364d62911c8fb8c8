"""Stage-I optimisation of FoodLearner against frozen encoders."""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from food_vocab_seg.encoders import ToyClip, VisualEmbedding
from food_vocab_seg.errors import ArchiveError, BatchError, ConfigError, NonFiniteError
from food_vocab_seg.foodlearner import ARCHIVE_PREFIX, EnrichedTokens, FoodLearner, FoodLearnerConfig, TokenKind
from food_vocab_seg.numcore import (
    AdamW,
    Linear,
    Module,
    RngState,
    Tensor,
    load_archive,
    no_grad,
    save_archive,
    strip_prefix,
    warmup_cosine_lr,
    with_prefix,
)
from food_vocab_seg.pretrain.losses import (
    hard_negatives,
    itc_loss,
    itc_similarity_matrix,
    itm_loss,
    lm_loss,
    pooled_text,
    sample_negatives,
)
from food_vocab_seg.pretrain.models import ItcConfig, LossBundle, PairBatch, RetrievalReport, Stage1Config

logger = logging.getLogger(__name__)

HEADS_PREFIX = "stage1"
OPTIM_PREFIX = "optim"
ENCODE_CHUNK = 32

PathLike = Union[str, Path]


class LossRecord(BaseModel):
    """One line of the Stage-I loss log."""
    step: int
    l_itc: float
    l_itm: float
    l_lm: float
    total: float
    lr: float


class Stage1Report(BaseModel):
    start_step: int = Field(..., ge=0)
    end_step: int = Field(..., ge=0)
    first_total: Optional[float] = None
    last_total: Optional[float] = None
    retrieval: Optional[RetrievalReport] = None


class Stage1Model(Module):
    """FoodLearner together with the matching and captioning heads it trains with."""

    def __init__(self, foodlearner: FoodLearner, rng: RngState):
        dim = foodlearner.config.d_query
        self.foodlearner = foodlearner
        self.itm_head = Linear(dim, 2, rng.child("itm_head"))
        self.lm_head = Linear(dim, foodlearner.vocab_size, rng.child("lm_head"))

    def heads_state(self) -> Dict[str, np.ndarray]:
        state = with_prefix(self.itm_head.state_dict(), "itm_head")
        state.update(with_prefix(self.lm_head.state_dict(), "lm_head"))
        return state


def encode_images(clip: ToyClip, images: np.ndarray) -> Tuple[np.ndarray, Tuple[int, int], Tuple[int, int]]:
    """Frozen patch tokens for a whole image array, computed in chunks.

    Returns:
        Tuple of ([N, P, d_v] tokens, source resolution, patch grid)
    """
    if len(images) == 0:
        raise BatchError("no images to encode")
    chunks = []
    resolution, grid = None, None
    with no_grad():
        for start in range(0, len(images), ENCODE_CHUNK):
            visual = clip.encode_image(images[start:start + ENCODE_CHUNK])
            resolution, grid = visual.source_resolution, visual.grid
            chunks.append(visual.tokens.numpy())
    return np.concatenate(chunks), resolution, grid


class Stage1Trainer:
    """Optimises L_ITC + L_ITM + L_LM over image-caption pairs.

    Only FoodLearner (query tokens included) and the two loss heads receive
    updates; the encoders must already be frozen.
    """

    def __init__(self, clip: ToyClip, foodlearner: FoodLearner, config: Stage1Config, rng: RngState):
        """Initialize the trainer.

        Args:
            clip: Frozen encoders
            foodlearner: Learner to optimise in place
            config: Optimisation settings
            rng: Stream for head initialisation, batch and negative sampling

        Raises:
            ConfigError: If the encoders are trainable
        """
        if not clip.frozen:
            logger.error("Stage I started with trainable encoders")
            raise ConfigError("encoders must be frozen before Stage I")
        self.clip = clip
        self.foodlearner = foodlearner
        self.config = config
        self.rng = rng
        self.itc_config = ItcConfig(phi=config.phi)
        self.model = Stage1Model(foodlearner, rng.child("heads"))
        self.optimizer = AdamW(list(self.model.named_parameters()), weight_decay=config.weight_decay)
        self.step = 0

    def learning_rate(self, step: int) -> float:
        c = self.config
        return warmup_cosine_lr(step, c.steps, c.warmup_steps, c.lr_start, c.lr_peak, c.lr_end)

    # --- losses ---
    def compute_losses(self, visual: VisualEmbedding, captions: Sequence[str], rng: RngState) -> LossBundle:
        """Forward all enabled objectives for one batch of pairs.

        Args:
            visual: Batched visual embedding of the B images
            captions: B captions, caption i belongs to image i
            rng: Stream for negative sampling

        Returns:
            LossBundle with disabled losses set to exactly zero
        """
        toggles = self.config.loss_toggles
        fl = self.foodlearner
        max_len = fl.config.max_text_len
        batch = self.clip.tokenizer.batch(list(captions))
        if batch.max_length > max_len:
            raise BatchError(f"caption of {batch.max_length} tokens exceeds {max_len}")

        queries = fl.encode_queries(visual)
        zero = Tensor(0.0)
        l_itc = l_itm = l_lm = zero
        similarity = None

        if toggles.itc:
            enriched_text = fl.encode_text(batch)
            itc_out = itc_loss(queries.value, pooled_text(enriched_text.value, batch.eos_positions), self.itc_config)
            l_itc, similarity = itc_out.loss, itc_out.similarity

        if toggles.itm and len(set(captions)) < 2:
            logger.debug("Every caption in the batch is identical; skipping the matching loss")
        elif toggles.itm:
            if self.config.itm_hard_negatives:
                if similarity is None:
                    enriched_text = fl.encode_text(batch)
                    similarity = itc_similarity_matrix(
                        queries.value, pooled_text(enriched_text.value, batch.eos_positions), self.itc_config.phi
                    )
                candidates = hard_negatives(similarity, captions)
            else:
                candidates = sample_negatives(captions, rng.child("negatives"))
            selected_visual = VisualEmbedding(
                tokens=visual.tokens[candidates.image_index],
                source_resolution=visual.source_resolution,
                grid=visual.grid,
            )
            selected_queries = EnrichedTokens(queries.value[candidates.image_index], TokenKind.ENRICHED_QUERY)
            matched = fl.encode_matching(selected_visual, selected_queries, batch.select(candidates.text_index))
            l_itm = itm_loss(matched.value, candidates.labels, self.model.itm_head).loss

        if toggles.lm:
            captioned = fl.encode_captioning(queries, batch)
            l_lm = lm_loss(captioned.value, batch.token_ids, self.model.lm_head).loss

        return LossBundle(l_itc=l_itc, l_itm=l_itm, l_lm=l_lm, total=l_itc + l_itm + l_lm)

    def _update(self, visual: VisualEmbedding, captions: Sequence[str]) -> Tuple[LossBundle, float]:
        lr = self.learning_rate(self.step)
        self.optimizer.zero_grad()
        try:
            losses = self.compute_losses(visual, captions, self.rng.child("step").child(self.step))
            if losses.total.requires_grad:
                losses.total.backward()
                self.optimizer.step(lr)
            else:
                logger.debug(f"Stage-I step {self.step} has no enabled loss to optimise")
        except NonFiniteError as e:
            logger.error(f"Non-finite value at Stage-I step {self.step} (lr={lr:.3e}): {e}")
            raise
        self.step += 1
        return losses, lr

    def stage1_step(self, batch: PairBatch) -> LossBundle:
        """Encode ``batch`` with the frozen image encoder and take one optimizer step."""
        if batch.size < 2:
            raise BatchError(f"Stage I needs at least 2 pairs per batch, got {batch.size}")
        with no_grad():
            visual = self.clip.encode_image(batch.images)
        visual = VisualEmbedding(visual.tokens.detach(), visual.source_resolution, visual.grid)
        losses, _ = self._update(visual, batch.captions)
        return losses

    # --- full run ---
    def fit(
        self,
        images: np.ndarray,
        captions: Sequence[str],
        log_path: Optional[PathLike] = None,
        checkpoint_path: Optional[PathLike] = None,
        stop_at: Optional[int] = None,
    ) -> Stage1Report:
        """Train up to ``config.steps`` steps, then score held-out retrieval.

        The last ``config.heldout`` pairs are never trained on. Training resumes
        from ``self.step``, so a restored trainer continues its schedule.

        Args:
            images: uint8 array [N, H, W, 3]
            captions: N captions
            log_path: Optional JSON Lines loss log, appended to
            checkpoint_path: Optional archive written after the last step
            stop_at: Pause after this many global steps; the schedule still spans ``config.steps``

        Returns:
            Stage1Report

        Raises:
            BatchError: If there are fewer than two training pairs
        """
        captions = list(captions)
        if len(captions) != len(images):
            raise BatchError(f"{len(images)} images but {len(captions)} captions")
        n_train = len(captions) - self.config.heldout
        if n_train < 2:
            raise BatchError(f"need more than {self.config.heldout + 1} pairs, got {len(captions)}")

        tokens, resolution, grid = encode_images(self.clip, images[:n_train])
        batch_size = min(self.config.batch_size, n_train)
        start_step = self.step
        first_total, last_total = None, None
        log_handle = None
        if log_path is not None:
            Path(log_path).parent.mkdir(parents=True, exist_ok=True)
            log_handle = open(log_path, "a", encoding="utf-8")

        last_step = self.config.steps if stop_at is None else min(stop_at, self.config.steps)
        logger.info(
            f"Stage I: {n_train} pairs, steps {start_step}..{last_step} of {self.config.steps}, "
            f"losses={self.config.loss_toggles.enabled()}"
        )
        try:
            while self.step < last_step:
                rows = np.sort(self.rng.child("batches").child(self.step).choice(n_train, batch_size))
                visual = VisualEmbedding(Tensor(tokens[rows]), resolution, grid)
                step = self.step
                losses, lr = self._update(visual, [captions[i] for i in rows])
                values = losses.as_floats()
                first_total = values["total"] if first_total is None else first_total
                last_total = values["total"]

                if log_handle is not None:
                    log_handle.write(LossRecord(step=step, lr=lr, **values).model_dump_json() + "\n")
                if step % self.config.log_every == 0 or self.step == last_step:
                    logger.info(
                        f"stage1 step {step}: total={values['total']:.4f} itc={values['l_itc']:.4f} "
                        f"itm={values['l_itm']:.4f} lm={values['l_lm']:.4f} lr={lr:.2e}"
                    )
                else:
                    logger.debug(f"stage1 step {step}: total={values['total']:.4f}")
        finally:
            if log_handle is not None:
                log_handle.close()

        if checkpoint_path is not None:
            self.save(checkpoint_path)

        retrieval = None
        if self.config.heldout >= 2:
            retrieval = self.evaluate_retrieval(images[n_train:], captions[n_train:])
        return Stage1Report(
            start_step=start_step,
            end_step=self.step,
            first_total=first_total,
            last_total=last_total,
            retrieval=retrieval,
        )

    def evaluate_retrieval(self, images: np.ndarray, captions: Sequence[str]) -> RetrievalReport:
        """Image-to-text recall@1 through the ITC similarity; equal captions count as hits."""
        return itc_retrieval(self.clip, self.foodlearner, images, captions, self.itc_config.phi)

    # --- persistence ---
    def save(self, path: PathLike) -> Path:
        """Write learner, heads, optimizer state and global step to one archive."""
        state = with_prefix(self.foodlearner.state_dict(), ARCHIVE_PREFIX)
        state.update(with_prefix(self.model.heads_state(), HEADS_PREFIX))
        state.update(with_prefix(self.optimizer.state_dict(), OPTIM_PREFIX))
        header = dict(self.foodlearner.archive_header())
        header.update({"stage": "1", "step": str(self.step), "stage1_config": self.config.model_dump_json()})
        save_archive(path, state, header)
        return Path(path)

    def resume(self, path: PathLike) -> int:
        """Restore everything written by ``save``; returns the restored step.

        Raises:
            ArchiveError: If the archive does not fit this trainer
        """
        arrays, header = load_archive(path)
        self.foodlearner.check_header(header)
        self.foodlearner.load_state_dict(strip_prefix(arrays, ARCHIVE_PREFIX))
        heads = strip_prefix(arrays, HEADS_PREFIX)
        self.model.itm_head.load_state_dict(strip_prefix(heads, "itm_head"))
        self.model.lm_head.load_state_dict(strip_prefix(heads, "lm_head"))
        self.optimizer.load_state_dict(strip_prefix(arrays, OPTIM_PREFIX))
        self.step = int(header.get("step", 0))
        logger.info(f"Resumed Stage I from {path} at step {self.step}")
        return self.step


def itc_retrieval(
    clip: ToyClip,
    foodlearner: FoodLearner,
    images: np.ndarray,
    captions: Sequence[str],
    phi: float,
) -> RetrievalReport:
    """Share of images whose highest-ITC caption equals their own caption."""
    captions = list(captions)
    if len(captions) == 0:
        return RetrievalReport(pairs=0, recall_at_1=0.0)
    with no_grad():
        visual = clip.encode_image(images)
        queries = foodlearner.encode_queries(visual).value
        batch = clip.tokenizer.batch(captions)
        text = pooled_text(foodlearner.encode_text(batch).value, batch.eos_positions)
        similarity = itc_similarity_matrix(queries, text, phi)
    best = np.argmax(similarity, axis=1)
    hits = [captions[j] == captions[i] for i, j in enumerate(best)]
    recall = float(np.mean(hits))
    logger.info(f"ITC retrieval recall@1 on {len(captions)} pairs: {recall:.3f}")
    return RetrievalReport(pairs=len(captions), recall_at_1=recall)


def load_stage1_foodlearner(path: PathLike) -> FoodLearner:
    """Rebuild a FoodLearner from a Stage-I archive using its recorded sizes.

    Raises:
        ArchiveError: If the archive lacks the learner entries or header
    """
    arrays, header = load_archive(path)
    try:
        config = FoodLearnerConfig(**json.loads(header["foodlearner_config"]))
        vocab_size, d_visual = int(header["vocab_size"]), int(header["d_visual"])
    except KeyError as e:
        raise ArchiveError(f"Archive {path} has no FoodLearner header field {e}") from e
    foodlearner = FoodLearner(vocab_size, d_visual, config, RngState(0))
    foodlearner.load_state_dict(strip_prefix(arrays, ARCHIVE_PREFIX))
    logger.info(f"Loaded FoodLearner (Q={config.q_tokens}, d_q={config.d_query}) from {path}")
    return foodlearner
