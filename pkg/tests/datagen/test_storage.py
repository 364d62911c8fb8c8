import json

import numpy as np
import pytest

from food_vocab_seg.datagen import build_dataset, read_pair_corpus, read_segmentation_set
from food_vocab_seg.encoders import Tokenizer
from food_vocab_seg.errors import DatasetError, SplitError


def test_layout(dataset_dir):
    for name in ("manifest.jsonl", "classes.json", "split.json", "vocab.txt", "pretrain/manifest.jsonl"):
        assert (dataset_dir / name).exists()


def test_segmentation_set_round_trip(dataset_dir):
    dataset = read_segmentation_set(dataset_dir)
    assert dataset.class_names[0] == "background"
    assert len(dataset.subset("train")) == 6
    assert len(dataset.subset("eval")) == 4
    images, masks = dataset.arrays("eval")
    assert images.shape == (4, 16, 16, 3)
    assert masks.shape == (4, 16, 16)
    assert dataset.split.covers(dataset.class_names)


def test_masks_are_stored_complete(dataset_dir):
    dataset = read_segmentation_set(dataset_dir)
    _, masks = dataset.arrays("train")
    stored = {dataset.class_names[i] for i in np.unique(masks) if i}
    listed = {name for record in dataset.subset("train") for name in record.classes}
    assert stored == listed


def test_pair_corpus(dataset_dir):
    images, captions = read_pair_corpus(dataset_dir)
    assert images.shape == (24, 16, 16, 3)
    assert all(c.startswith(("a dish with", "an empty plate")) for c in captions)


def test_vocabulary_covers_captions(dataset_dir):
    tokenizer = Tokenizer.from_file(dataset_dir / "vocab.txt")
    _, captions = read_pair_corpus(dataset_dir)
    for caption in captions:
        assert all(word in tokenizer for word in caption.split())


def test_same_seed_same_bytes(tmp_path, datagen_config):
    build_dataset(tmp_path / "a", datagen_config, seed=3)
    build_dataset(tmp_path / "b", datagen_config, seed=3)
    for name in ("manifest.jsonl", "split.json", "images/train_00002.png", "masks/eval_00001.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_existing_directory_needs_force(dataset_dir, datagen_config):
    with pytest.raises(DatasetError):
        build_dataset(dataset_dir, datagen_config, seed=1)
    split = build_dataset(dataset_dir, datagen_config, seed=1, force=True)
    assert split.seed == 1


def test_corrupt_manifest_line(dataset_dir):
    with open(dataset_dir / "manifest.jsonl", "a", encoding="utf-8") as handle:
        handle.write("{not json}\n")
    with pytest.raises(DatasetError, match="manifest.jsonl"):
        read_segmentation_set(dataset_dir)


def test_missing_class_list(dataset_dir):
    (dataset_dir / "classes.json").unlink()
    with pytest.raises(DatasetError):
        read_segmentation_set(dataset_dir)


def test_explicit_split_path(dataset_dir, tmp_path):
    other = tmp_path / "other.json"
    other.write_text(json.dumps({"base": ["background", "egg", "rice", "tomato"], "novel": ["carrot"]}))
    assert read_segmentation_set(dataset_dir, other).split.novel == ["carrot"]
    with pytest.raises(SplitError):
        read_segmentation_set(dataset_dir, tmp_path / "absent.json")


def test_empty_subset(tmp_path, datagen_config):
    root = tmp_path / "noeval"
    build_dataset(root, datagen_config.model_copy(update={"n_eval": 0}), seed=0)
    with pytest.raises(DatasetError):
        read_segmentation_set(root).arrays("eval")
