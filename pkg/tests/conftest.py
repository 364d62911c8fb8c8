"""Shared fixtures: tiny encoders, learners and datasets that run in milliseconds."""

from pathlib import Path
from typing import List, NamedTuple, Optional

import numpy as np
import pytest
from hypothesis import settings

from food_vocab_seg.cli import RunConfig
from food_vocab_seg.datagen import DatagenConfig, build_dataset, class_names_for, read_pair_corpus
from food_vocab_seg.datagen.corpus import vocabulary_texts
from food_vocab_seg.datagen.storage import VOCAB
from food_vocab_seg.encoders import ClipPretrainReport, EncoderConfig, Tokenizer, ToyClip, pretrain_toy_clip
from food_vocab_seg.foodlearner import FoodLearner, FoodLearnerConfig
from food_vocab_seg.numcore import RngState
from food_vocab_seg.segmentation import Stage2Config

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")

TINY_CLASSES = class_names_for(4)
DESK_CONFIG = Path(__file__).resolve().parents[1] / "configs" / "desk.json"


class DeskStack(NamedTuple):
    """A desk-scale dataset on disk with encoders aligned on its pair corpus."""
    run: RunConfig
    root: Path
    clip: ToyClip
    clip_report: ClipPretrainReport
    images: np.ndarray
    captions: List[str]


@pytest.fixture
def rng() -> RngState:
    return RngState(0)


@pytest.fixture
def encoder_config() -> EncoderConfig:
    return EncoderConfig(image_size=16, patch_size=8, d_visual=8, d_text=8, layers=1, heads=2, max_text_len=16)


@pytest.fixture
def foodlearner_config() -> FoodLearnerConfig:
    return FoodLearnerConfig(q_tokens=2, d_query=8, layers=1, heads=2, max_text_len=16)


@pytest.fixture
def stage2_config() -> Stage2Config:
    return Stage2Config(
        n_proposals=4,
        head_dim=8,
        head_layers=1,
        head_heads=2,
        mask_size=8,
        steps=3,
        batch_size=2,
        log_every=1,
    )


@pytest.fixture
def tokenizer() -> Tokenizer:
    return Tokenizer.build(vocabulary_texts(TINY_CLASSES, ["a dish with egg and rice", "an empty plate"]))


@pytest.fixture
def clip(tokenizer, encoder_config) -> ToyClip:
    return ToyClip(tokenizer, encoder_config, RngState(1)).freeze()


@pytest.fixture
def foodlearner(tokenizer, encoder_config, foodlearner_config) -> FoodLearner:
    return FoodLearner(tokenizer.vocab_size, encoder_config.d_visual, foodlearner_config, RngState(2))


@pytest.fixture
def images() -> np.ndarray:
    return RngState(3).integers(0, 256, size=(4, 16, 16, 3)).astype(np.uint8)


@pytest.fixture
def datagen_config() -> DatagenConfig:
    return DatagenConfig(
        n_classes=4,
        n_modes=2,
        image_size=16,
        max_blobs=2,
        n_pairs=24,
        n_train=6,
        n_eval=4,
        fraction_novel=0.25,
    )


@pytest.fixture
def dataset_dir(tmp_path, datagen_config):
    root = tmp_path / "data"
    build_dataset(root, datagen_config, seed=0)
    return root


@pytest.fixture
def desk_run() -> RunConfig:
    return RunConfig.from_file(DESK_CONFIG)


@pytest.fixture
def desk_stack(tmp_path, desk_run):
    """Factory building the desk dataset for a seed and aligning encoders on it."""

    def build(seed: int, clip_steps: Optional[int] = None, **datagen) -> DeskStack:
        clip_train = desk_run.clip_train
        if clip_steps is not None:
            clip_train = clip_train.model_copy(update={"steps": clip_steps})
        run = desk_run.model_copy(update={
            "seed": seed,
            "datagen": desk_run.datagen.model_copy(update=datagen),
            "clip_train": clip_train,
        })
        root = tmp_path / f"desk_{seed}"
        build_dataset(root, run.datagen, seed)
        images, captions = read_pair_corpus(root)
        rng = RngState(seed)
        clip = ToyClip(Tokenizer.from_file(root / VOCAB), run.encoders, rng.child("encoders"))
        report = pretrain_toy_clip(clip, images, captions, run.clip_train, rng.child("clip_train"))
        return DeskStack(run, root, clip, report, images, captions)

    return build
