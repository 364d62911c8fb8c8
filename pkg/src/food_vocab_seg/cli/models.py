"""Run configuration and response models for the command line."""

import json
import logging
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from food_vocab_seg.config import DATA_DIR, OUT_DIR
from food_vocab_seg.datagen import DatagenConfig
from food_vocab_seg.encoders import ClipTrainConfig, EncoderConfig
from food_vocab_seg.errors import ConfigError
from food_vocab_seg.foodlearner import FoodLearnerConfig
from food_vocab_seg.pretrain import Stage1Config
from food_vocab_seg.segmentation import Stage2Config

logger = logging.getLogger(__name__)

CONFIG_ECHO = "config.json"


class PathsConfig(BaseModel):
    """Where commands read inputs and write artifacts; unset paths resolve inside ``out``."""
    model_config = ConfigDict(extra="forbid")

    data: str = Field(DATA_DIR, description="Dataset directory written by gen-data")
    out: str = Field(OUT_DIR, description="Run directory for checkpoints, logs and reports")
    split: Optional[str] = Field(None, description="Split file; defaults to <data>/split.json")
    encoders: Optional[str] = Field(None, description="Encoder directory; defaults to <out>/encoders")
    stage1: Optional[str] = Field(None, description="Stage-I archive; defaults to <out>/stage1.safetensors")
    stage2: Optional[str] = Field(None, description="Stage-II archive; defaults to <out>/stage2.safetensors")

    def resolve(self) -> "PathsConfig":
        out = Path(self.out)
        return self.model_copy(update={
            "split": self.split or str(Path(self.data) / "split.json"),
            "encoders": self.encoders or str(out / "encoders"),
            "stage1": self.stage1 or str(out / "stage1.safetensors"),
            "stage2": self.stage2 or str(out / "stage2.safetensors"),
        })


class RunConfig(BaseModel):
    """Every hyperparameter of a run, one section per pipeline stage."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(0, ge=0, description="Root seed of every random stream")
    split_seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], description="Seeds of extra splits")
    full_class: bool = Field(False, description="Train and score on every class, no held-out set")
    include_background: bool = Field(False, description="Score background pixels as well")
    no_stage1: bool = Field(False, description="Start Stage II from a random FoodLearner")
    paths: PathsConfig = Field(default_factory=PathsConfig)
    datagen: DatagenConfig = Field(default_factory=DatagenConfig)
    encoders: EncoderConfig = Field(default_factory=EncoderConfig)
    clip_train: ClipTrainConfig = Field(default_factory=ClipTrainConfig)
    foodlearner: FoodLearnerConfig = Field(default_factory=FoodLearnerConfig)
    stage1: Stage1Config = Field(default_factory=Stage1Config)
    stage2: Stage2Config = Field(default_factory=Stage2Config)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """Load a JSON config; keys it omits keep their defaults.

        Raises:
            ConfigError: If the file is missing or not JSON
            ValidationError: If a key is unknown or a value is out of range
        """
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
        logger.debug(f"Loaded run config from {path}")
        return cls.model_validate(data)

    def echo(self, directory: Union[str, Path]) -> Path:
        """Write the effective config into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / CONFIG_ECHO
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path


class ErrorResponse(BaseModel):
    """Error printed as JSON on stderr."""
    error: str = Field(..., description="Error class")
    detail: Optional[str] = Field(None, description="Additional error details")

    @classmethod
    def from_exception(cls, exc: Exception) -> "ErrorResponse":
        if isinstance(exc, ValidationError):
            return cls(error="ValidationError", detail=str(exc))
        return cls(error=type(exc).__name__, detail=str(exc) or None)
