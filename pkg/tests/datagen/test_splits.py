import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from food_vocab_seg.datagen import (
    ClassSplit,
    SegSample,
    block_novel,
    class_names_for,
    mask_base_only,
    split_classes,
    split_classes_multi,
)
from food_vocab_seg.errors import SplitError

NAMES = class_names_for(10)


@given(seed=st.integers(0, 2 ** 32), fraction=st.floats(0.1, 0.9))
def test_split_partitions_classes(seed, fraction):
    split = split_classes(NAMES, fraction, seed)
    assert split.covers(NAMES)
    assert "background" in split.base
    assert "background" not in split.novel
    assert len(split.novel) == round(fraction * 10)
    assert split.seed == seed


def test_split_is_deterministic():
    assert split_classes(NAMES, 0.2, 3) == split_classes(NAMES, 0.2, 3)


@pytest.mark.parametrize("fraction", [0.0, 1.0, 0.01, 0.99])
def test_degenerate_fractions(fraction):
    with pytest.raises(SplitError):
        split_classes(NAMES, fraction, 0)


def test_multi_splits_are_distinct():
    splits = split_classes_multi(class_names_for(4), 0.25, [0, 1, 2, 3])
    assert len({frozenset(s.novel) for s in splits}) == 4


def test_multi_split_gives_up_when_exhausted():
    with pytest.raises(SplitError):
        split_classes_multi(class_names_for(4), 0.25, [0, 1, 2, 3, 4])


def test_split_model_rejects_overlap_and_novel_background():
    with pytest.raises(ValueError):
        ClassSplit(base=["background", "egg"], novel=["egg"])
    with pytest.raises(ValueError):
        ClassSplit(base=["egg"], novel=["background"])


def test_split_file_round_trip(tmp_path):
    split = split_classes(NAMES, 0.3, 1)
    split.to_file(tmp_path / "split.json")
    assert ClassSplit.from_file(tmp_path / "split.json") == split


def test_split_file_errors(tmp_path):
    with pytest.raises(SplitError):
        ClassSplit.from_file(tmp_path / "absent.json")
    (tmp_path / "bad.json").write_text('{"base": ["egg"], "novel": ["egg"]}')
    with pytest.raises(SplitError):
        ClassSplit.from_file(tmp_path / "bad.json")


def test_block_novel_leaves_input_untouched():
    names = ["background", "egg", "rice", "corn"]
    split = ClassSplit(base=["background", "egg", "corn"], novel=["rice"])
    masks = np.array([[0, 1, 2, 3], [2, 2, 1, 0]], dtype=np.uint8)
    blocked = block_novel(masks, split, names)
    assert blocked.tolist() == [[0, 1, 0, 3], [0, 0, 1, 0]]
    assert masks[0, 2] == 2


def test_mask_base_only_rewrites_caption():
    names = ["background", "egg", "rice"]
    split = ClassSplit(base=["background", "egg"], novel=["rice"])
    sample = SegSample(
        index=0,
        image=np.zeros((2, 2, 3), dtype=np.uint8),
        mask=np.array([[1, 2], [0, 2]], dtype=np.uint8),
        present_classes=["egg", "rice"],
        caption="a dish with egg and rice",
    )
    blocked = mask_base_only(sample, split, names)
    assert blocked.present_classes == ["egg"]
    assert blocked.caption == "a dish with egg"
    assert blocked.mask.tolist() == [[1, 0], [0, 0]]
