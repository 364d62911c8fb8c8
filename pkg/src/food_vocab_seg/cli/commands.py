"""Pipeline commands: each reads a RunConfig, writes artifacts and returns its report."""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import BaseModel

from food_vocab_seg.cli.models import RunConfig
from food_vocab_seg.datagen import (
    ClassSplit,
    SegmentationSet,
    block_novel,
    build_dataset,
    class_names_for,
    read_pair_corpus,
    read_segmentation_set,
    split_classes_multi,
)
from food_vocab_seg.datagen.storage import VOCAB
from food_vocab_seg.encoders import ClipPretrainReport, Tokenizer, ToyClip, pretrain_toy_clip
from food_vocab_seg.errors import CheckpointMismatchError, ConfigError, DatasetError, InvalidInputError, SplitError
from food_vocab_seg.foodlearner import FoodLearner
from food_vocab_seg.metrics import AggregateReport, MetricsReport, accumulate, aggregate_reports, summarize
from food_vocab_seg.numcore import RngState
from food_vocab_seg.pretrain import Stage1Report, Stage1Trainer, load_stage1_foodlearner
from food_vocab_seg.segmentation import (
    OpenVocabSegmenter,
    Stage2Report,
    Stage2Trainer,
    foreground,
    load_segmenter,
    nearest_resize,
    segment_image,
    segment_many,
    write_prediction,
)

logger = logging.getLogger(__name__)

CLIP_REPORT = "clip_report.json"
STAGE1_LOG = "stage1_log.jsonl"
STAGE1_REPORT = "stage1_report.json"
STAGE2_LOG = "stage2_log.jsonl"
STAGE2_REPORT = "stage2_report.json"
EVAL_REPORT = "report.json"
AGGREGATE_REPORT = "aggregate.json"
PREDICTIONS_DIR = "predictions"


def write_report(report: BaseModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_clip(run: RunConfig) -> ToyClip:
    """Frozen encoders saved by ``pretrain-clip``.

    Raises:
        ConfigError: If the encoder directory does not exist
    """
    directory = Path(run.paths.resolve().encoders)
    if not (directory / "encoders.safetensors").exists():
        logger.error(f"No encoders in {directory}")
        raise ConfigError(f"Encoders not found in {directory}; run pretrain-clip first")
    return ToyClip.load(directory)


def _split_for(run: RunConfig, dataset: SegmentationSet) -> Optional[ClassSplit]:
    if run.full_class:
        return None
    split = dataset.split
    if split is None or not split.covers(dataset.class_names):
        logger.error("Split file does not partition the dataset classes")
        raise SplitError(f"split {run.paths.resolve().split} does not cover the classes of {dataset.root}")
    return split


def _read_dataset(run: RunConfig) -> Tuple[SegmentationSet, Optional[ClassSplit]]:
    paths = run.paths.resolve()
    dataset = read_segmentation_set(paths.data, None if run.full_class else paths.split)
    return dataset, _split_for(run, dataset)


def cmd_gen_data(run: RunConfig, force: bool = False) -> Path:
    """Write the synthetic dataset to ``paths.data`` plus one extra split per ``split_seeds`` entry.

    Raises:
        DatasetError: If the directory exists and ``force`` is False
    """
    root = Path(run.paths.data)
    build_dataset(root, run.datagen, run.seed, force=force)
    class_names = class_names_for(run.datagen.n_classes)
    for k, split in enumerate(split_classes_multi(class_names, run.datagen.fraction_novel, run.split_seeds)):
        split.to_file(root / f"split_{k}.json")
    run.echo(root)
    return root


def cmd_pretrain_clip(run: RunConfig) -> ClipPretrainReport:
    """Align and freeze the toy encoders on the dataset's pair corpus."""
    paths = run.paths.resolve()
    vocab_path = Path(paths.data) / VOCAB
    if not vocab_path.exists():
        raise DatasetError(f"Vocabulary not found: {vocab_path}")
    images, captions = read_pair_corpus(paths.data)
    if images.shape[1] != run.encoders.image_size:
        raise ConfigError(f"dataset images are {images.shape[1]}px but encoders expect {run.encoders.image_size}px")

    rng = RngState(run.seed)
    clip = ToyClip(Tokenizer.from_file(vocab_path), run.encoders, rng.child("encoders"))
    report = pretrain_toy_clip(clip, images, captions, run.clip_train, rng.child("clip_train"))
    clip.save(paths.encoders)
    write_report(report, Path(paths.out) / CLIP_REPORT)
    run.echo(paths.out)
    return report


def cmd_pretrain(run: RunConfig, resume: Optional[str] = None) -> Stage1Report:
    """Stage I over the pair corpus; writes the archive, loss log and report.

    Args:
        run: Effective configuration
        resume: Stage-I archive to continue from; its step and optimizer state are restored
    """
    paths = run.paths.resolve()
    clip = load_clip(run)
    images, captions = read_pair_corpus(paths.data)

    rng = RngState(run.seed)
    foodlearner = FoodLearner(clip.tokenizer.vocab_size, clip.config.d_visual, run.foodlearner, rng.child("foodlearner"))
    trainer = Stage1Trainer(clip, foodlearner, run.stage1, rng.child("stage1"))
    log_path = Path(paths.out) / STAGE1_LOG
    if resume:
        trainer.resume(resume)
    else:
        log_path.unlink(missing_ok=True)

    report = trainer.fit(images, captions, log_path=log_path, checkpoint_path=paths.stage1)
    write_report(report, Path(paths.out) / STAGE1_REPORT)
    run.echo(paths.out)
    return report


def _stage2_foodlearner(run: RunConfig, clip: ToyClip, rng: RngState) -> FoodLearner:
    if run.no_stage1:
        logger.info("Stage II starts from a random FoodLearner")
        return FoodLearner(clip.tokenizer.vocab_size, clip.config.d_visual, run.foodlearner, rng.child("foodlearner"))
    path = Path(run.paths.resolve().stage1)
    if not path.exists():
        raise ConfigError(f"Stage-I archive not found: {path}; run pretrain first or pass --no-stage1")
    foodlearner = load_stage1_foodlearner(path)
    if foodlearner.vocab_size != clip.tokenizer.vocab_size or foodlearner.d_visual != clip.config.d_visual:
        raise CheckpointMismatchError(f"Stage-I archive {path} was trained against different encoders")
    return foodlearner


def cmd_train_seg(run: RunConfig) -> Stage2Report:
    """Stage II on the base classes of the split (every class with ``full_class``).

    Raises:
        SplitError: If the split does not partition the dataset classes
    """
    paths = run.paths.resolve()
    clip = load_clip(run)
    dataset, split = _read_dataset(run)
    class_names = dataset.class_names
    novel = set(split.novel) if split is not None else set()
    train_classes = [name for name in foreground(class_names) if name not in novel]

    images, masks = dataset.arrays("train")
    if split is not None:
        masks = block_novel(masks, split, class_names)

    rng = RngState(run.seed)
    foodlearner = _stage2_foodlearner(run, clip, rng)
    side = run.encoders.image_size // run.encoders.patch_size
    segmenter = OpenVocabSegmenter(foodlearner, clip.config.d_text, (side, side), run.stage2, rng.child("segmenter"))
    trainer = Stage2Trainer(clip, segmenter, class_names, train_classes, rng.child("stage2"))

    log_path = Path(paths.out) / STAGE2_LOG
    log_path.unlink(missing_ok=True)
    report = trainer.fit(images, masks, log_path=log_path)
    trainer.save(paths.stage2)
    write_report(report, Path(paths.out) / STAGE2_REPORT)
    run.echo(paths.out)
    return report


def _read_rgb(path: Path, size: int) -> Tuple[np.ndarray, Tuple[int, int]]:
    if not path.exists():
        raise InvalidInputError(f"Image not found: {path}")
    with Image.open(path) as handle:
        rgb = handle.convert("RGB")
        original = (rgb.height, rgb.width)
        if original != (size, size):
            rgb = rgb.resize((size, size), Image.BILINEAR)
        return np.array(rgb), original


def cmd_infer(run: RunConfig, image_paths: Sequence[str], classes: Optional[Sequence[str]] = None) -> List[Path]:
    """Segment images against any class-name list; defaults to the checkpoint's foreground classes.

    Returns:
        Paths of the written class-map PNGs and their JSON sidecars
    """
    paths = run.paths.resolve()
    clip = load_clip(run)
    segmenter, checkpoint = load_segmenter(paths.stage2)
    class_names = list(classes) if classes else foreground(checkpoint.class_names)
    directory = Path(paths.out) / PREDICTIONS_DIR

    written: List[Path] = []
    for image_path in map(Path, image_paths):
        image, (height, width) = _read_rgb(image_path, clip.config.image_size)
        class_map = nearest_resize(segment_image(segmenter, clip, image, class_names), height, width)
        written += write_prediction(class_map, class_names, directory, image_path.stem)
    logger.info(f"Wrote {len(image_paths)} predictions to {directory}")
    return written


def cmd_eval(run: RunConfig) -> MetricsReport:
    """Score the Stage-II checkpoint on the eval subset over every foreground class.

    Raises:
        CheckpointMismatchError: If the dataset classes differ from the checkpoint's
    """
    paths = run.paths.resolve()
    clip = load_clip(run)
    segmenter, checkpoint = load_segmenter(paths.stage2)
    dataset, split = _read_dataset(run)
    class_names = dataset.class_names
    checkpoint.check_classes(class_names)

    images, masks = dataset.arrays("eval")
    vocabulary = list(class_names) if run.include_background else foreground(class_names)
    to_dataset = np.array([class_names.index(name) for name in vocabulary], dtype=np.int64)
    predictions = to_dataset[segment_many(segmenter, clip, images, vocabulary)]

    counts = accumulate(predictions, masks, len(class_names), run.include_background)
    report = summarize(
        counts,
        class_names,
        split if split is not None else (),
        include_background=run.include_background,
        seed=run.seed,
        run={
            "checkpoint": str(paths.stage2),
            "static_text": str(segmenter.config.static_text).lower(),
            "templates": str(segmenter.config.templates),
        },
    )
    write_report(report, Path(paths.out) / EVAL_REPORT)
    run.echo(paths.out)
    return report


def cmd_aggregate(run: RunConfig, report_paths: Sequence[str]) -> AggregateReport:
    """Mean and standard deviation of several evaluation reports."""
    reports = []
    for path in map(Path, report_paths):
        if not path.exists():
            raise InvalidInputError(f"Report not found: {path}")
        reports.append(MetricsReport.model_validate_json(path.read_text(encoding="utf-8")))
    aggregate = aggregate_reports(reports)
    write_report(aggregate, Path(run.paths.out) / AGGREGATE_REPORT)
    return aggregate
