"""Data models for Stage-I pre-training of FoodLearner."""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from food_vocab_seg.errors import BatchError
from food_vocab_seg.numcore import Tensor


@dataclass(frozen=True)
class PairBatch:
    """B images with their captions; pair i is the only positive for row i."""
    images: np.ndarray
    captions: List[str]

    def __post_init__(self):
        if len(self.images) != len(self.captions):
            raise BatchError(f"{len(self.images)} images but {len(self.captions)} captions")

    @property
    def size(self) -> int:
        return len(self.captions)

    @property
    def gt_i2t(self) -> np.ndarray:
        return np.eye(self.size)

    @property
    def gt_t2i(self) -> np.ndarray:
        return np.eye(self.size)


@dataclass(frozen=True)
class ItmCandidates:
    """Image/caption index pairs scored by the matching head; label 1 = match."""
    image_index: np.ndarray
    text_index: np.ndarray
    labels: np.ndarray

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])


@dataclass(frozen=True)
class LossBundle:
    """Stage-I losses; ``total`` is exactly ``l_itc + l_itm + l_lm``."""
    l_itc: Tensor
    l_itm: Tensor
    l_lm: Tensor
    total: Tensor

    def as_floats(self) -> Dict[str, float]:
        return {
            "l_itc": self.l_itc.item(),
            "l_itm": self.l_itm.item(),
            "l_lm": self.l_lm.item(),
            "total": self.total.item(),
        }


class ItcConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    phi: float = Field(10.0, gt=0, description="Temperature multiplying cosine similarities")


class LossToggles(BaseModel):
    """Which Stage-I objectives contribute to the total."""
    model_config = ConfigDict(extra="forbid")

    itc: bool = True
    itm: bool = True
    lm: bool = True

    @classmethod
    def parse(cls, text: str) -> "LossToggles":
        """Build from a comma list such as ``"itc,itm"``."""
        names = {name.strip().lower() for name in text.split(",") if name.strip()}
        unknown = names - {"itc", "itm", "lm"}
        if unknown:
            raise ValueError(f"Unknown loss names: {sorted(unknown)}")
        if not names:
            raise ValueError("At least one loss must be enabled")
        return cls(itc="itc" in names, itm="itm" in names, lm="lm" in names)

    def enabled(self) -> List[str]:
        return [name for name in ("itc", "itm", "lm") if getattr(self, name)]


class Stage1Config(BaseModel):
    """Optimisation settings of Stage I."""
    model_config = ConfigDict(extra="forbid")

    phi: float = Field(10.0, gt=0, description="ITC temperature")
    batch_size: int = Field(16, ge=2, description="Pairs per step")
    steps: int = Field(400, ge=0, description="Optimizer steps")
    warmup_steps: int = Field(40, ge=0, description="Linear warmup steps")
    lr_start: float = Field(1e-6, gt=0, description="Learning rate at step 0")
    lr_peak: float = Field(1e-4, gt=0, description="Learning rate at the end of warmup")
    lr_end: float = Field(1e-5, gt=0, description="Learning rate at the last step")
    weight_decay: float = Field(0.05, ge=0, description="Decoupled weight decay")
    loss_toggles: LossToggles = Field(default_factory=LossToggles)
    itm_hard_negatives: bool = Field(False, description="Pick the most ITC-similar wrong caption as negative")
    heldout: int = Field(16, ge=0, description="Pairs held out for retrieval recall")
    log_every: int = Field(20, gt=0, description="Steps between progress log lines")


class RetrievalReport(BaseModel):
    """Held-out image-to-text retrieval through ITC similarity."""
    pairs: int = Field(..., ge=0)
    recall_at_1: float = Field(..., ge=0, le=1)
