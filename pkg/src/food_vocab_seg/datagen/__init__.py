"""Synthetic dish corpora with exact masks, captions and base/novel splits."""

from food_vocab_seg.datagen.corpus import build_dataset, vocabulary_texts
from food_vocab_seg.datagen.generator import (
    FOOD_NAMES,
    class_names_for,
    dish_caption,
    gen_corpus,
    make_classes,
    render_sample,
)
from food_vocab_seg.datagen.models import (
    AppearanceMode,
    ClassSplit,
    DatagenConfig,
    IngredientClass,
    ManifestRecord,
    PairRecord,
    SegSample,
)
from food_vocab_seg.datagen.splits import block_novel, mask_base_only, split_classes, split_classes_multi
from food_vocab_seg.datagen.storage import (
    SegmentationSet,
    prepare_directory,
    read_pair_corpus,
    read_segmentation_set,
    write_pair_corpus,
    write_segmentation_set,
)

__all__ = [
    "AppearanceMode",
    "ClassSplit",
    "DatagenConfig",
    "FOOD_NAMES",
    "IngredientClass",
    "ManifestRecord",
    "PairRecord",
    "SegSample",
    "SegmentationSet",
    "block_novel",
    "build_dataset",
    "class_names_for",
    "dish_caption",
    "gen_corpus",
    "make_classes",
    "mask_base_only",
    "prepare_directory",
    "read_pair_corpus",
    "read_segmentation_set",
    "render_sample",
    "split_classes",
    "split_classes_multi",
    "vocabulary_texts",
    "write_pair_corpus",
    "write_segmentation_set",
]
