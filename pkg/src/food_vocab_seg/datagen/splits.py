"""Base/novel class partitions and blocking of novel annotations."""

import logging
from dataclasses import replace
from typing import List, Sequence

import numpy as np

from food_vocab_seg.config import BACKGROUND_CLASS
from food_vocab_seg.datagen.generator import dish_caption
from food_vocab_seg.datagen.models import ClassSplit, SegSample
from food_vocab_seg.errors import SplitError
from food_vocab_seg.numcore import RngState

logger = logging.getLogger(__name__)

MAX_REDRAWS = 100


def split_classes(class_names: Sequence[str], fraction_novel: float, seed: int) -> ClassSplit:
    """Uniformly partition the ingredient classes; background is always base.

    Raises:
        SplitError: If the fraction leaves either side empty
    """
    if not 0 < fraction_novel < 1:
        raise SplitError(f"fraction_novel must be in (0, 1), got {fraction_novel}")
    candidates = [name for name in class_names if name != BACKGROUND_CLASS]
    n_novel = int(round(fraction_novel * len(candidates)))
    if n_novel == 0 or n_novel == len(candidates):
        raise SplitError(f"fraction {fraction_novel} of {len(candidates)} classes leaves an empty side")

    chosen = set(RngState(seed).child("split").choice(len(candidates), n_novel).tolist())
    novel = [name for i, name in enumerate(candidates) if i in chosen]
    base = [name for name in class_names if name not in novel]
    return ClassSplit(base=base, novel=novel, seed=seed)


def split_classes_multi(class_names: Sequence[str], fraction_novel: float, seeds: Sequence[int]) -> List[ClassSplit]:
    """One split per seed, re-drawing with a shifted seed when a novel set repeats.

    Raises:
        SplitError: If distinct splits cannot be found
    """
    splits: List[ClassSplit] = []
    for seed in seeds:
        candidate = seed
        for _ in range(MAX_REDRAWS):
            split = split_classes(class_names, fraction_novel, candidate)
            if all(set(split.novel) != set(other.novel) for other in splits):
                break
            logger.debug(f"Split for seed {candidate} repeats an earlier one; re-drawing")
            candidate += 1_000_003
        else:
            raise SplitError(f"no distinct split found for seed {seed}")
        splits.append(split)
    return splits


def mask_base_only(sample: SegSample, split: ClassSplit, class_names: Sequence[str]) -> SegSample:
    """Training copy of ``sample`` with novel-class pixels relabeled background.

    Args:
        sample: Evaluation sample, left untouched
        split: Partition deciding which classes are hidden
        class_names: Dataset classes; mask value ``i`` is ``class_names[i]``
    """
    present = [name for name in sample.present_classes if name not in set(split.novel)]
    mask = block_novel(sample.mask, split, class_names)
    return replace(sample, mask=mask, present_classes=present, caption=dish_caption(present))


def block_novel(masks: np.ndarray, split: ClassSplit, class_names: Sequence[str]) -> np.ndarray:
    """Copy of one or more masks with novel-class pixels set to background (0)."""
    novel_ids = [i for i, name in enumerate(class_names) if name in set(split.novel)]
    blocked = np.array(masks, copy=True)
    if novel_ids:
        blocked[np.isin(blocked, novel_ids)] = 0
    return blocked
