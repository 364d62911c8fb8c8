import json

import numpy as np
import pytest
from PIL import Image

from food_vocab_seg.errors import InvalidInputError
from food_vocab_seg.numcore import RngState, Tensor
from food_vocab_seg.segmentation import (
    OpenVocabSegmenter,
    ProposalSet,
    nearest_resize,
    segment_image,
    segment_images,
    segment_many,
    write_prediction,
)
from food_vocab_seg.segmentation.inference import vote_masks

CLASSES = ["egg", "rice", "tomato"]


@pytest.fixture
def segmenter(foodlearner, stage2_config):
    return OpenVocabSegmenter(foodlearner, 8, (2, 2), stage2_config, RngState(7))


def test_single_confident_proposal_paints_everything():
    proposals = ProposalSet(
        tokens=Tensor(np.zeros((1, 1, 4))),
        mask_logits=Tensor(np.full((1, 1, 4, 4), 10.0)),
        class_logits=Tensor(np.array([[[-5.0, 9.0, -5.0, -5.0]]])),
    )
    assert np.all(vote_masks(proposals) == 1)


def test_segment_image_keeps_resolution(segmenter, clip, images):
    class_map = segment_image(segmenter, clip, images[0], CLASSES)
    assert class_map.shape == (16, 16)
    assert class_map.min() >= 0 and class_map.max() < len(CLASSES)


def test_segmentation_is_deterministic(segmenter, clip, images):
    a = segment_images(segmenter, clip, images, CLASSES)
    b = segment_images(segmenter, clip, images, CLASSES)
    assert np.array_equal(a, b)


def test_segment_many_keeps_order(segmenter, clip, images):
    expected = segment_images(segmenter, clip, images, CLASSES)
    assert np.array_equal(segment_many(segmenter, clip, images, CLASSES, chunk=1), expected)
    assert segment_many(segmenter, clip, images[:0], CLASSES).shape == (0, 16, 16)


def test_unseen_class_names_need_no_new_parameters(segmenter, clip, images):
    before = segmenter.num_parameters()
    class_map = segment_image(segmenter, clip, images[0], ["carrot", "zucchini"])
    assert segmenter.num_parameters() == before
    assert set(np.unique(class_map)) <= {0, 1}


def test_bad_inputs(segmenter, clip, images):
    with pytest.raises(InvalidInputError):
        segment_images(segmenter, clip, images[0], CLASSES)
    with pytest.raises(InvalidInputError):
        segment_image(segmenter, clip, images[0], [])


def test_write_prediction(tmp_path):
    class_map = np.array([[0, 1], [2, 1]])
    png, sidecar = write_prediction(class_map, CLASSES, tmp_path / "predictions", "dish")
    with Image.open(png) as handle:
        assert handle.mode == "L"
        assert np.array_equal(np.array(handle), class_map)
    assert json.loads(sidecar.read_text()) == {"image": "dish.png", "classes": {"0": "egg", "1": "rice", "2": "tomato"}}


def test_write_prediction_rejects_wide_maps(tmp_path):
    with pytest.raises(InvalidInputError):
        write_prediction(np.array([[300]]), ["x"] * 301, tmp_path, "wide")


def test_nearest_resize():
    small = np.array([[1, 2], [3, 4]])
    assert nearest_resize(small, 4, 4).tolist() == [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]]
    assert np.array_equal(nearest_resize(nearest_resize(small, 4, 4), 2, 2), small)
