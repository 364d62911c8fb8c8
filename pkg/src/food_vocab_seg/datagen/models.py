"""Data models for the synthetic dish corpus."""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from food_vocab_seg.config import BACKGROUND_CLASS
from food_vocab_seg.errors import SplitError

SHAPES = ("ellipse", "rectangle", "triangle", "diamond")
TEXTURES = ("solid", "stripes", "dots", "checker")


@dataclass(frozen=True)
class AppearanceMode:
    """One way an ingredient can look (e.g. boiled vs scrambled)."""
    shape: str
    texture: str
    color: Tuple[int, int, int]
    accent: Tuple[int, int, int]

    @property
    def signature(self) -> Tuple[str, str, Tuple[int, int, int]]:
        return self.shape, self.texture, self.color


@dataclass(frozen=True)
class IngredientClass:
    """Class ``index`` of the mask palette; index 0 is background and has no modes."""
    index: int
    name: str
    modes: Tuple[AppearanceMode, ...]


@dataclass(frozen=True)
class SegSample:
    """A rendered dish: RGB image, class-index mask and the visible ingredients."""
    index: int
    image: np.ndarray
    mask: np.ndarray
    present_classes: List[str]
    caption: str

    def class_ids(self) -> List[int]:
        return [int(c) for c in np.unique(self.mask) if c != 0]


class DatagenConfig(BaseModel):
    """Sizes of the generated corpora."""
    model_config = ConfigDict(extra="forbid")

    n_classes: int = Field(24, ge=4, description="Ingredient classes (background excluded)")
    n_modes: int = Field(2, ge=1, description="Appearance modes per class")
    image_size: int = Field(64, ge=16, description="Square image resolution")
    max_blobs: int = Field(4, ge=1, description="Most ingredients per dish")
    n_pairs: int = Field(512, ge=0, description="Stage-I image-caption pairs")
    n_train: int = Field(128, ge=0, description="Stage-II training images")
    n_eval: int = Field(64, ge=0, description="Evaluation images")
    fraction_novel: float = Field(0.2, gt=0, lt=1, description="Share of classes held out as novel")
    noise_std: float = Field(4.0, ge=0, description="Pixel noise added to every image")


class ClassSplit(BaseModel):
    """Disjoint base/novel partition of the class list."""
    base: List[str]
    novel: List[str]
    seed: int = 0

    @model_validator(mode="after")
    def check_disjoint(self) -> "ClassSplit":
        overlap = set(self.base) & set(self.novel)
        if overlap:
            raise ValueError(f"classes in both base and novel: {sorted(overlap)}")
        if BACKGROUND_CLASS in self.novel:
            raise ValueError("background cannot be a novel class")
        return self

    @property
    def all_classes(self) -> List[str]:
        return list(self.base) + list(self.novel)

    def covers(self, class_names: Sequence[str]) -> bool:
        return set(self.all_classes) == set(class_names)

    def to_file(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2), encoding="utf-8")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ClassSplit":
        """Read a split file; ``seed`` is optional so published class lists load as-is."""
        path = Path(path)
        if not path.exists():
            raise SplitError(f"Split file not found: {path}")
        try:
            return cls(**json.loads(path.read_text(encoding="utf-8")))
        except (ValueError, TypeError) as e:
            raise SplitError(f"Invalid split file {path}: {e}") from e


class ManifestRecord(BaseModel):
    """One Stage-II sample in ``manifest.jsonl``."""
    image: str
    mask: str
    caption: str
    classes: List[str]
    subset: str = Field("train", pattern="^(train|eval)$")


class PairRecord(BaseModel):
    """One Stage-I pair in ``pretrain/manifest.jsonl``."""
    image_path: str
    caption: str
