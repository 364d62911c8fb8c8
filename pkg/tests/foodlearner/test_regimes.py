import numpy as np
import pytest

from food_vocab_seg.errors import RegimeError
from food_vocab_seg.foodlearner import BIDIRECTIONAL, CAUSAL, UNIMODAL


def test_unimodal_keeps_sides_apart():
    allowed = UNIMODAL.mask(2, 3)[0]
    assert allowed[:2, :2].all() and allowed[2:, 2:].all()
    assert not allowed[:2, 2:].any() and not allowed[2:, :2].any()


def test_bidirectional_sees_everything():
    assert BIDIRECTIONAL.mask(2, 3).all()


def test_causal_text_reads_queries_and_its_past():
    allowed = CAUSAL.mask(2, 3)[0]
    assert allowed[:2, :2].all()
    assert not allowed[:2, 2:].any()
    assert allowed[2:, :2].all()
    assert allowed[2:, 2:].tolist() == [[True, False, False], [True, True, False], [True, True, True]]


def test_unimodal_allows_one_side_only():
    assert UNIMODAL.mask(0, 3).shape == (1, 3, 3)
    assert UNIMODAL.mask(2, 0).all()


@pytest.mark.parametrize("regime", [BIDIRECTIONAL, CAUSAL])
def test_multimodal_needs_both_sides(regime):
    with pytest.raises(RegimeError):
        regime.mask(0, 3)
    with pytest.raises(RegimeError):
        regime.mask(2, 0)


def test_padding_hides_keys_per_row():
    pad = np.array([[False, False, True], [False, False, False]])
    allowed = BIDIRECTIONAL.mask(1, 3, text_pad=pad)
    assert allowed.shape == (2, 4, 4)
    assert not allowed[0, :, 3].any()
    assert allowed[1, :, 3].all()


def test_padding_width_must_match():
    with pytest.raises(RegimeError):
        CAUSAL.mask(1, 3, text_pad=np.zeros((1, 2), dtype=bool))
