"""End-to-end synthetic dataset build: pairs, segmentation sets, split and vocabulary."""

import logging
from pathlib import Path
from typing import List, Union

from food_vocab_seg.datagen.generator import class_names_for, gen_corpus, make_classes
from food_vocab_seg.datagen.models import ClassSplit, DatagenConfig
from food_vocab_seg.datagen.splits import split_classes
from food_vocab_seg.datagen.storage import VOCAB, prepare_directory, write_pair_corpus, write_segmentation_set
from food_vocab_seg.encoders import Tokenizer
from food_vocab_seg.encoders.prompts import template_words
from food_vocab_seg.numcore import RngState

logger = logging.getLogger(__name__)


def vocabulary_texts(class_names: List[str], captions: List[str]) -> List[str]:
    """Every text whose words belong in the shared vocabulary."""
    return list(class_names) + template_words() + list(captions) + ["a dish with and an empty plate"]


def build_dataset(root: Union[str, Path], cfg: DatagenConfig, seed: int, force: bool = False) -> ClassSplit:
    """Generate and write the whole synthetic corpus under ``root``.

    Writes the Stage-I pair corpus, the train/eval segmentation set with
    complete masks, ``classes.json``, ``split.json`` and ``vocab.txt``.

    Args:
        root: Output directory
        cfg: Corpus sizes
        seed: Seed of every random choice, the split included
        force: Replace an existing directory

    Returns:
        The written ClassSplit

    Raises:
        DatasetError: If ``root`` exists and ``force`` is False
    """
    root = prepare_directory(root, force)
    rng = RngState(seed)
    classes = make_classes(cfg.n_classes, cfg.n_modes, rng.child("classes"))
    class_names = class_names_for(cfg.n_classes)

    pairs = gen_corpus(cfg.n_classes, cfg.n_pairs, rng.child("pretrain"), cfg, classes)
    train = gen_corpus(cfg.n_classes, cfg.n_train, rng.child("train"), cfg, classes)
    evaluation = gen_corpus(cfg.n_classes, cfg.n_eval, rng.child("eval"), cfg, classes)
    split = split_classes(class_names, cfg.fraction_novel, seed)

    write_pair_corpus(root, pairs)
    write_segmentation_set(root, train, evaluation, class_names, split)
    captions = [s.caption for s in pairs + train + evaluation]
    Tokenizer.build(vocabulary_texts(class_names, captions)).to_file(root / VOCAB)
    logger.info(f"Dataset ready in {root}: {len(class_names) - 1} classes, novel={split.novel}")
    return split
