"""Stage-II training of the segmenter on base classes."""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from food_vocab_seg.config import BACKGROUND_CLASS
from food_vocab_seg.encoders import ToyClip, VisualEmbedding
from food_vocab_seg.errors import ArchiveError, BatchError, CheckpointMismatchError, ConfigError, NonFiniteError
from food_vocab_seg.foodlearner import FoodLearner, FoodLearnerConfig
from food_vocab_seg.numcore import (
    AdamW,
    RngState,
    Tensor,
    load_archive,
    poly_lr,
    save_archive,
    strip_prefix,
    with_prefix,
)
from food_vocab_seg.pretrain.trainer import encode_images
from food_vocab_seg.segmentation.losses import Stage2Loss, stage2_loss
from food_vocab_seg.segmentation.model import ARCHIVE_PREFIX, OpenVocabSegmenter
from food_vocab_seg.segmentation.models import SegTargets, Stage2Config, Stage2Report, nearest_resize
from food_vocab_seg.segmentation.text import static_embeddings

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class Stage2Record(BaseModel):
    """One line of the Stage-II loss log."""
    step: int
    l_cls: float
    l_dice: float
    total: float
    lr: float


def foreground(class_names: Sequence[str]) -> List[str]:
    return [name for name in class_names if name != BACKGROUND_CLASS]


class Stage2Trainer:
    """Optimises CE + Dice over base-class regions with frozen encoders.

    ``train_classes`` is the classifier vocabulary during training: the base
    classes of the split, or every foreground class in full-class mode.
    """

    def __init__(
        self,
        clip: ToyClip,
        segmenter: OpenVocabSegmenter,
        class_names: Sequence[str],
        train_classes: Sequence[str],
        rng: RngState,
    ):
        """Initialize the trainer.

        Args:
            clip: Frozen encoders
            segmenter: Model trained in place
            class_names: Dataset classes; mask value ``i`` is ``class_names[i]``
            train_classes: Class names whose regions are supervised
            rng: Stream for batch sampling

        Raises:
            ConfigError: If the encoders are trainable or a class is unknown
        """
        if not clip.frozen:
            logger.error("Stage II started with trainable encoders")
            raise ConfigError("encoders must be frozen before Stage II")
        unknown = sorted(set(train_classes) - set(class_names))
        if unknown:
            raise ConfigError(f"training classes not in the dataset: {unknown}")
        if not train_classes:
            raise ConfigError("no training classes")

        self.clip = clip
        self.segmenter = segmenter
        self.config = segmenter.config
        self.class_names = list(class_names)
        self.train_classes = list(train_classes)
        self.rng = rng
        self.class_to_index: Dict[int, int] = {
            self.class_names.index(name): i for i, name in enumerate(self.train_classes)
        }
        self.unsupervised_ids = np.array(
            [i for i, name in enumerate(self.class_names) if name not in self.train_classes and name != BACKGROUND_CLASS],
            dtype=np.int64,
        )
        self.e_static = static_embeddings(clip, self.train_classes, self.config.templates)
        self.optimizer = AdamW(list(segmenter.named_parameters()), weight_decay=self.config.weight_decay)
        self.step = 0
        self.novel_pixels_in_loss = 0

    def learning_rate(self, step: int) -> float:
        return poly_lr(step, self.config.steps, self.config.lr, power=self.config.poly_power)

    def targets_for(self, mask: np.ndarray) -> SegTargets:
        """Supervised regions of one training mask; counts any held-out pixels that reach it."""
        small = nearest_resize(mask, self.config.mask_size, self.config.mask_size)
        leaked = int(np.isin(small, self.unsupervised_ids).sum())
        if leaked:
            self.novel_pixels_in_loss += leaked
            logger.warning(f"{leaked} pixels of unsupervised classes reached the Stage-II targets")
        return SegTargets.from_mask(mask, self.class_to_index, self.config.mask_size)

    def compute_loss(self, visual: VisualEmbedding, targets: Sequence[SegTargets]) -> Tuple[Stage2Loss, List[Stage2Loss]]:
        """Mean of per-image losses over a batch."""
        _, proposals = self.segmenter(visual, self.e_static)
        per_image = [stage2_loss(proposals.select(i), t, self.config) for i, t in enumerate(targets)]
        scale = 1.0 / len(per_image)
        l_cls, l_dice, total = per_image[0].l_cls, per_image[0].l_dice, per_image[0].total
        for item in per_image[1:]:
            l_cls, l_dice, total = l_cls + item.l_cls, l_dice + item.l_dice, total + item.total
        mean = Stage2Loss(l_cls=l_cls * scale, l_dice=l_dice * scale, total=total * scale, match=per_image[0].match)
        return mean, per_image

    def _update(self, visual: VisualEmbedding, targets: Sequence[SegTargets]) -> Tuple[Stage2Loss, float]:
        lr = self.learning_rate(self.step)
        self.optimizer.zero_grad()
        try:
            loss, _ = self.compute_loss(visual, targets)
            loss.total.backward()
            self.optimizer.step(lr)
        except NonFiniteError as e:
            logger.error(f"Non-finite value at Stage-II step {self.step} (lr={lr:.3e}): {e}")
            raise
        self.step += 1
        return loss, lr

    def stage2_step(self, images: np.ndarray, masks: np.ndarray) -> Stage2Loss:
        """One optimizer step on a batch of training images and (base-only) masks."""
        images, masks = np.asarray(images), np.asarray(masks)
        if images.ndim == 3:
            images, masks = images[None], masks[None]
        tokens, resolution, grid = encode_images(self.clip, images)
        targets = [self.targets_for(m) for m in masks]
        loss, _ = self._update(VisualEmbedding(Tensor(tokens), resolution, grid), targets)
        return loss

    def fit(self, images: np.ndarray, masks: np.ndarray, log_path: Optional[PathLike] = None) -> Stage2Report:
        """Train for ``config.steps`` steps on random batches.

        Args:
            images: uint8 array [N, H, W, 3]
            masks: Training masks [N, H, W] with held-out classes already blocked
            log_path: Optional JSON Lines loss log

        Returns:
            Stage2Report
        """
        if len(images) != len(masks) or len(images) == 0:
            raise BatchError(f"{len(images)} images but {len(masks)} masks")
        tokens, resolution, grid = encode_images(self.clip, images)
        targets = [self.targets_for(m) for m in masks]
        batch_size = min(self.config.batch_size, len(images))
        first_total, last_total = None, None
        log_handle = None
        if log_path is not None:
            Path(log_path).parent.mkdir(parents=True, exist_ok=True)
            log_handle = open(log_path, "a", encoding="utf-8")

        mode = "static-text" if self.config.static_text else "image-informed"
        logger.info(f"Stage II ({mode}): {len(images)} images, {len(self.train_classes)} classes, {self.config.steps} steps")
        try:
            while self.step < self.config.steps:
                step = self.step
                rows = np.sort(self.rng.child("batches").child(step).choice(len(images), batch_size))
                visual = VisualEmbedding(Tensor(tokens[rows]), resolution, grid)
                loss, lr = self._update(visual, [targets[i] for i in rows])
                total = loss.total.item()
                first_total = total if first_total is None else first_total
                last_total = total

                if log_handle is not None:
                    record = Stage2Record(step=step, l_cls=loss.l_cls.item(), l_dice=loss.l_dice.item(), total=total, lr=lr)
                    log_handle.write(record.model_dump_json() + "\n")
                if step % self.config.log_every == 0 or self.step == self.config.steps:
                    logger.info(
                        f"stage2 step {step}: total={total:.4f} cls={loss.l_cls.item():.4f} "
                        f"dice={loss.l_dice.item():.4f} lr={lr:.2e}"
                    )
        finally:
            if log_handle is not None:
                log_handle.close()

        return Stage2Report(
            steps=self.step,
            first_total=first_total,
            last_total=last_total,
            novel_pixels_in_loss=self.novel_pixels_in_loss,
        )

    def save(self, path: PathLike) -> Path:
        """Write the segmenter with its class lists to a ``stage2.`` archive."""
        header = self.segmenter.archive_header()
        header.update({
            "class_names": json.dumps(self.class_names),
            "train_classes": json.dumps(self.train_classes),
        })
        save_archive(path, with_prefix(self.segmenter.state_dict(), ARCHIVE_PREFIX), header)
        return Path(path)


class Stage2Checkpoint(BaseModel):
    """Class lists recorded next to a Stage-II archive."""
    class_names: List[str]
    train_classes: List[str]

    def check_classes(self, class_names: Sequence[str]) -> None:
        """Raise CheckpointMismatchError unless ``class_names`` equals the training-era list."""
        if list(class_names) != self.class_names:
            logger.error("Evaluation classes differ from the checkpoint's classes")
            raise CheckpointMismatchError(
                f"checkpoint was trained with {len(self.class_names)} classes {self.class_names[:4]}..., "
                f"got {len(class_names)} classes {list(class_names)[:4]}..."
            )


def load_segmenter(path: PathLike) -> Tuple[OpenVocabSegmenter, Stage2Checkpoint]:
    """Rebuild a segmenter from a Stage-II archive.

    Raises:
        ArchiveError: If the archive is not a Stage-II checkpoint
    """
    arrays, header = load_archive(path)
    try:
        fl_config = FoodLearnerConfig(**json.loads(header["foodlearner_config"]))
        config = Stage2Config(**json.loads(header["stage2_config"]))
        grid = tuple(json.loads(header["grid"]))
        foodlearner = FoodLearner(int(header["vocab_size"]), int(header["d_visual"]), fl_config, RngState(0))
        segmenter = OpenVocabSegmenter(foodlearner, int(header["d_text"]), grid, config, RngState(0))
        checkpoint = Stage2Checkpoint(
            class_names=json.loads(header["class_names"]),
            train_classes=json.loads(header["train_classes"]),
        )
    except KeyError as e:
        raise ArchiveError(f"Archive {path} is not a Stage-II checkpoint: missing {e}") from e
    segmenter.load_state_dict(strip_prefix(arrays, ARCHIVE_PREFIX))
    logger.info(f"Loaded Stage-II segmenter from {path}")
    return segmenter, checkpoint
