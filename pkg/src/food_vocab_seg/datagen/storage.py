"""On-disk dataset layout: PNG images and masks with JSON Lines manifests."""

import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image
from pydantic import ValidationError

from food_vocab_seg.datagen.models import ClassSplit, ManifestRecord, PairRecord, SegSample
from food_vocab_seg.errors import DatasetError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST = "manifest.jsonl"
CLASSES = "classes.json"
SPLIT = "split.json"
VOCAB = "vocab.txt"
PRETRAIN_DIR = "pretrain"


def prepare_directory(path: PathLike, force: bool = False) -> Path:
    """Create ``path``; an existing non-empty directory is replaced only with ``force``.

    Raises:
        DatasetError: If the directory exists, is not empty and ``force`` is False
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()):
        if not force:
            raise DatasetError(f"Output directory {path} exists; pass --force to overwrite")
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _save_png(array: np.ndarray, path: Path, mode: str) -> None:
    Image.fromarray(array, mode=mode).save(path, optimize=False)


def _load_png(path: Path, mode: str) -> np.ndarray:
    if not path.exists():
        raise DatasetError(f"Missing file {path}")
    with Image.open(path) as handle:
        return np.array(handle.convert(mode))


def _read_jsonl(path: Path, model):
    if not path.exists():
        raise DatasetError(f"Manifest not found: {path}")
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(model(**json.loads(line)))
            except (json.JSONDecodeError, ValidationError) as e:
                raise DatasetError(f"{path}:{line_no}: invalid record: {e}") from e
    return records


def write_segmentation_set(
    root: PathLike,
    train: Sequence[SegSample],
    evaluation: Sequence[SegSample],
    class_names: Sequence[str],
    split: Optional[ClassSplit] = None,
) -> Path:
    """Write ``images/``, ``masks/``, ``manifest.jsonl``, ``classes.json`` and ``split.json``.

    Masks are complete; Stage-II training blocks novel classes with the split at load time.
    """
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    with open(root / MANIFEST, "w", encoding="utf-8") as manifest:
        for subset, samples in (("train", train), ("eval", evaluation)):
            for sample in samples:
                name = f"{subset}_{sample.index:05d}.png"
                _save_png(sample.image, root / "images" / name, "RGB")
                _save_png(sample.mask, root / "masks" / name, "L")
                record = ManifestRecord(
                    image=f"images/{name}",
                    mask=f"masks/{name}",
                    caption=sample.caption,
                    classes=sample.present_classes,
                    subset=subset,
                )
                manifest.write(record.model_dump_json() + "\n")
    (root / CLASSES).write_text(json.dumps(list(class_names), indent=2), encoding="utf-8")
    if split is not None:
        split.to_file(root / SPLIT)
    logger.info(f"Wrote {len(train)} train and {len(evaluation)} eval samples to {root}")
    return root


def write_pair_corpus(root: PathLike, samples: Sequence[SegSample]) -> Path:
    """Write Stage-I pairs as ``pretrain/images/*.png`` plus ``pretrain/manifest.jsonl``."""
    directory = Path(root) / PRETRAIN_DIR
    (directory / "images").mkdir(parents=True, exist_ok=True)
    with open(directory / MANIFEST, "w", encoding="utf-8") as manifest:
        for sample in samples:
            name = f"pair_{sample.index:05d}.png"
            _save_png(sample.image, directory / "images" / name, "RGB")
            manifest.write(PairRecord(image_path=f"images/{name}", caption=sample.caption).model_dump_json() + "\n")
    logger.info(f"Wrote {len(samples)} image-caption pairs to {directory}")
    return directory


def read_pair_corpus(root: PathLike) -> Tuple[np.ndarray, List[str]]:
    """Images [N, H, W, 3] and captions of the Stage-I corpus under ``root``.

    Raises:
        DatasetError: If the manifest or an image is missing or malformed
    """
    directory = Path(root) / PRETRAIN_DIR
    records = _read_jsonl(directory / MANIFEST, PairRecord)
    if not records:
        raise DatasetError(f"Empty pair corpus in {directory}")
    images = np.stack([_load_png(directory / r.image_path, "RGB") for r in records])
    return images, [r.caption for r in records]


@dataclass
class SegmentationSet:
    """A Stage-II dataset read back from disk."""
    root: Path
    class_names: List[str]
    records: List[ManifestRecord]
    split: Optional[ClassSplit]

    def subset(self, name: str) -> List[ManifestRecord]:
        return [r for r in self.records if r.subset == name]

    def arrays(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """Images [N, H, W, 3] and masks [N, H, W] of one subset."""
        records = self.subset(name)
        if not records:
            raise DatasetError(f"No {name} samples in {self.root}")
        images = np.stack([_load_png(self.root / r.image, "RGB") for r in records])
        masks = np.stack([_load_png(self.root / r.mask, "L") for r in records])
        if int(masks.max()) >= len(self.class_names):
            raise DatasetError(f"Mask value {int(masks.max())} outside {len(self.class_names)} classes")
        return images, masks


def read_segmentation_set(root: PathLike, split_path: Optional[PathLike] = None) -> SegmentationSet:
    """Read ``manifest.jsonl``, ``classes.json`` and the split (``split.json`` unless given).

    Raises:
        DatasetError: If a required file is missing or malformed
    """
    root = Path(root)
    classes_path = root / CLASSES
    if not classes_path.exists():
        raise DatasetError(f"Class list not found: {classes_path}")
    class_names = json.loads(classes_path.read_text(encoding="utf-8"))
    records = _read_jsonl(root / MANIFEST, ManifestRecord)
    split_file = Path(split_path) if split_path is not None else root / SPLIT
    split = ClassSplit.from_file(split_file) if split_path is not None or split_file.exists() else None
    return SegmentationSet(root=root, class_names=class_names, records=records, split=split)
