import numpy as np
import pytest

from food_vocab_seg.numcore import RngState


def test_same_seed_same_draws():
    assert np.array_equal(RngState(5).normal((4,)), RngState(5).normal((4,)))


def test_children_do_not_depend_on_parent_draws():
    parent = RngState(5)
    before = parent.child("data").normal((3,))
    parent.normal((100,))
    assert np.array_equal(parent.child("data").normal((3,)), before)


def test_named_children_differ():
    rng = RngState(5)
    assert not np.array_equal(rng.child("a").normal((3,)), rng.child("b").normal((3,)))
    assert not np.array_equal(rng.child(1).normal((3,)), rng.child(2).normal((3,)))


def test_choice_without_replacement_is_distinct():
    picked = RngState(0).choice(10, 10)
    assert sorted(picked.tolist()) == list(range(10))


@pytest.mark.parametrize("seed", [-1, 2 ** 64])
def test_seed_range(seed):
    with pytest.raises(ValueError):
        RngState(seed)


def test_draw_counter():
    rng = RngState(0)
    rng.uniform((2,))
    rng.integers(0, 3)
    assert rng.draws == 2
