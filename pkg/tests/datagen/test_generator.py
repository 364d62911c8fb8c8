import numpy as np
import pytest

from food_vocab_seg.datagen import DatagenConfig, class_names_for, dish_caption, gen_corpus, make_classes
from food_vocab_seg.errors import DatasetError
from food_vocab_seg.numcore import RngState


def test_class_names_start_with_background():
    names = class_names_for(40)
    assert names[0] == "background"
    assert names[1:3] == ["egg", "rice"]
    assert names[-1] == "ingredient39"
    assert len(set(names)) == 41


def test_classes_have_distinct_modes():
    classes = make_classes(6, 3, RngState(0))
    signatures = [mode.signature for c in classes for mode in c.modes]
    assert len(signatures) == 18
    assert len(set(signatures)) == 18
    assert [c.index for c in classes] == list(range(1, 7))


def test_too_few_classes():
    with pytest.raises(DatasetError):
        make_classes(3, 1, RngState(0))


@pytest.mark.parametrize(
    "names, caption",
    [([], "an empty plate"), (["egg"], "a dish with egg"), (["rice", "egg", "corn"], "a dish with corn egg and rice")],
)
def test_dish_caption(names, caption):
    assert dish_caption(names) == caption


def test_corpus_is_deterministic(datagen_config):
    a = gen_corpus(4, 5, RngState(7), datagen_config)
    b = gen_corpus(4, 5, RngState(7), datagen_config)
    for x, y in zip(a, b):
        assert np.array_equal(x.image, y.image)
        assert np.array_equal(x.mask, y.mask)
        assert x.caption == y.caption


def test_masks_match_captions(datagen_config):
    names = class_names_for(4)
    for sample in gen_corpus(4, 8, RngState(1), datagen_config):
        assert sample.image.shape == (16, 16, 3)
        assert sample.image.dtype == np.uint8
        assert sample.mask.shape == (16, 16)
        assert sorted(sample.present_classes) == sorted(names[i] for i in sample.class_ids())
        assert sample.caption == dish_caption(sample.present_classes)


def test_first_class_cycles_through_classes():
    cfg = DatagenConfig(n_classes=4, image_size=32, max_blobs=1, noise_std=0.0)
    samples = gen_corpus(4, 4, RngState(2), cfg)
    assert [s.class_ids() for s in samples] == [[1], [2], [3], [4]]


def test_shared_classes_must_match_count(datagen_config):
    classes = make_classes(4, 2, RngState(0))
    with pytest.raises(DatasetError):
        gen_corpus(5, 2, RngState(0), datagen_config, classes)
