"""Data models for Stage-II open-vocabulary segmentation."""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from food_vocab_seg.errors import ShapeError
from food_vocab_seg.numcore import Tensor, softmax


@dataclass(frozen=True)
class ImageInformedEmbedding:
    """Pooled visual knowledge, static class embeddings and their exact sum.

    ``e_hat`` is [B, d], ``e_static`` is [C, d] and ``e_fused`` is [B, C, d].
    """
    e_hat: Tensor
    e_static: Tensor
    e_fused: Tensor


@dataclass(frozen=True)
class ProposalSet:
    """Per-image proposal outputs; a leading batch axis is always present.

    ``class_logits``/``class_probs`` are [B, N_p, C + 1] with the no-object
    column last; ``mask_logits`` is [B, N_p, h, w].
    """
    tokens: Tensor
    mask_logits: Tensor
    class_logits: Tensor

    @property
    def class_probs(self) -> Tensor:
        return softmax(self.class_logits, axis=-1)

    @property
    def batch_size(self) -> int:
        return self.tokens.shape[0]

    @property
    def num_proposals(self) -> int:
        return self.tokens.shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_logits.shape[-1] - 1

    def select(self, index: int) -> "ProposalSet":
        """Outputs of one image, keeping a batch axis of 1."""
        return ProposalSet(
            tokens=self.tokens[index:index + 1],
            mask_logits=self.mask_logits[index:index + 1],
            class_logits=self.class_logits[index:index + 1],
        )


@dataclass(frozen=True)
class SegTargets:
    """Ground-truth regions of one image: class index and binary mask per region."""
    gt_class: np.ndarray
    gt_mask: np.ndarray

    def __post_init__(self):
        if self.gt_mask.ndim != 3 or self.gt_mask.shape[0] != self.gt_class.shape[0]:
            raise ShapeError(f"{self.gt_class.shape[0]} classes for masks of shape {self.gt_mask.shape}")
        if self.gt_mask.shape[0] and int(self.gt_mask.sum(axis=0).max()) > 1:
            raise ShapeError("region masks overlap")

    @property
    def num_regions(self) -> int:
        return int(self.gt_class.shape[0])

    @classmethod
    def from_mask(cls, mask: np.ndarray, class_to_index: Mapping[int, int], size: int) -> "SegTargets":
        """Regions of ``mask`` for the classes in ``class_to_index``, resampled to ``size``.

        Args:
            mask: [H, W] class-index map
            class_to_index: Dataset class id to training class index; other ids are skipped
            size: Mask-branch resolution
        """
        small = nearest_resize(mask, size, size)
        present = [int(c) for c in np.unique(small) if int(c) in class_to_index]
        if not present:
            return cls(np.zeros(0, dtype=np.int64), np.zeros((0, size, size)))
        return cls(
            gt_class=np.array([class_to_index[c] for c in present], dtype=np.int64),
            gt_mask=np.stack([(small == c).astype(np.float64) for c in present]),
        )


@dataclass(frozen=True)
class MatchResult:
    """Proposal ``proposal_index[k]`` is assigned to target ``target_index[k]``."""
    proposal_index: np.ndarray
    target_index: np.ndarray
    cost: float

    def as_dict(self) -> Dict[int, int]:
        return {int(p): int(t) for p, t in zip(self.proposal_index, self.target_index)}


class Stage2Config(BaseModel):
    """Head sizes and optimisation settings of Stage II."""
    model_config = ConfigDict(extra="forbid")

    tau: float = Field(100.0, gt=0, description="Temperature re-scaling proposal/class cosines")
    n_proposals: int = Field(8, gt=0, description="Proposal tokens N_p")
    head_dim: int = Field(64, gt=0, description="Width of proposal tokens")
    head_layers: int = Field(2, gt=0, description="Blocks of the mask head")
    head_heads: int = Field(4, gt=0, description="Attention heads of the mask head")
    mask_size: int = Field(32, gt=0, description="Mask-branch resolution")
    dice_smooth: float = Field(1.0, ge=0, description="Dice smoothing epsilon")
    class_weight: float = Field(1.0, ge=0, description="Weight of the classification term")
    dice_weight: float = Field(1.0, ge=0, description="Weight of the Dice term")
    no_object_weight: float = Field(0.1, ge=0, description="CE weight of unmatched proposals")
    steps: int = Field(300, ge=0, description="Optimizer steps")
    batch_size: int = Field(4, gt=0, description="Images per step")
    lr: float = Field(1e-3, gt=0, description="Base learning rate of the poly schedule")
    poly_power: float = Field(0.9, gt=0, description="Exponent of the poly schedule")
    weight_decay: float = Field(1e-4, ge=0, description="Decoupled weight decay")
    templates: Union[str, List[str]] = Field("default", description="Prompt preset name or explicit templates")
    static_text: bool = Field(False, description="Force pooled visual knowledge to zero")
    log_every: int = Field(20, gt=0, description="Steps between progress log lines")


class Stage2Report(BaseModel):
    steps: int = Field(..., ge=0)
    first_total: Optional[float] = None
    last_total: Optional[float] = None
    novel_pixels_in_loss: int = Field(0, ge=0)


class PredictionSidecar(BaseModel):
    """JSON written next to a predicted class-index PNG."""
    image: str
    classes: Dict[int, str]


def nearest_resize(array: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resampling of the first two axes (pixel centres)."""
    in_h, in_w = array.shape[:2]
    rows = np.minimum(((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.int64), in_h - 1)
    cols = np.minimum(((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.int64), in_w - 1)
    return array[rows][:, cols]
