import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from food_vocab_seg.errors import InvalidInputError, ShapeError
from food_vocab_seg.numcore import (
    RngState,
    Tensor,
    cosine_similarity,
    cross_entropy,
    finite_diff_check,
    l2_normalize,
    layer_norm,
    log_softmax,
    nll_from_log_probs,
    resize_bilinear,
    resize_matrix,
)


def test_cosine_of_45_degrees():
    assert cosine_similarity(Tensor([1.0, 0.0]), Tensor([1.0, 1.0])).item() == pytest.approx(0.70710678, abs=1e-8)


def test_cosine_rejects_zero_vector():
    with pytest.raises(InvalidInputError):
        cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 1.0]))


def test_cosine_rejects_mismatched_shapes():
    with pytest.raises(ShapeError):
        cosine_similarity(Tensor([1.0, 0.0]), Tensor([1.0, 1.0, 1.0]))


@given(st.lists(st.floats(min_value=0.1, max_value=10), min_size=2, max_size=6))
def test_l2_normalize_gives_unit_norm(values):
    assert np.linalg.norm(l2_normalize(Tensor(values)).numpy()) == pytest.approx(1.0, abs=1e-12)


def test_cross_entropy_of_explicit_distribution():
    assert cross_entropy(Tensor([0.25, 0.75]), 1).item() == pytest.approx(-np.log(0.75))


def test_cross_entropy_of_one_hot_target_is_zero():
    assert cross_entropy(Tensor([0.0, 1.0, 0.0]), 1).item() == 0.0


@pytest.mark.parametrize("vocab", [2, 7, 50])
def test_cross_entropy_of_uniform_is_log_v(vocab):
    assert cross_entropy(Tensor(np.full(vocab, 1.0 / vocab)), vocab - 1).item() == pytest.approx(np.log(vocab))


def test_cross_entropy_of_confident_prediction():
    assert cross_entropy(Tensor([0.9999546, 0.0000454]), 0).item() == pytest.approx(4.54e-5, rel=1e-3)


@pytest.mark.parametrize(
    "probs, target",
    [([0.5, 0.6], 0), ([-0.5, 1.5], 1), ([1.0, 0.0], 1), ([0.5, 0.5], 2)],
)
def test_cross_entropy_rejects_bad_input(probs, target):
    with pytest.raises(InvalidInputError):
        cross_entropy(Tensor(probs), target)


def test_weighted_nll_normalises_by_weight_sum():
    log_probs = Tensor(np.log([[0.5, 0.5], [0.9, 0.1]]))
    loss = nll_from_log_probs(log_probs, np.array([0, 1]), np.array([1.0, 3.0]))
    assert loss.item() == pytest.approx(-(np.log(0.5) + 3 * np.log(0.1)) / 4)


def test_resize_matrix_rows_sum_to_one():
    for in_size, out_size in [(2, 8), (8, 2), (5, 7), (4, 4)]:
        assert np.allclose(resize_matrix(in_size, out_size).sum(axis=1), 1.0)


def test_resize_to_same_size_is_identity():
    assert np.allclose(resize_matrix(6, 6), np.eye(6))


def test_resize_bilinear_keeps_constants():
    out = resize_bilinear(np.full((2, 3, 3), 4.0), 9, 6).numpy()
    assert out.shape == (2, 9, 6)
    assert np.allclose(out, 4.0)


def test_composite_gradients_pass_finite_differences():
    rng = RngState(7)
    for trial in range(5):
        stream = rng.child(trial)
        x = Tensor(stream.normal((3, 4)), requires_grad=True)
        gamma = Tensor(1.0 + stream.normal((4,), 0.1), requires_grad=True)
        beta = Tensor(stream.normal((4,), 0.1), requires_grad=True)
        targets = np.array([0, 3, 1])

        def loss():
            normed = layer_norm(x, gamma, beta)
            return nll_from_log_probs(log_softmax(l2_normalize(normed) * 5.0, axis=-1), targets)

        report = finite_diff_check(loss, {"x": x, "gamma": gamma, "beta": beta})
        assert report.passed, report.per_parameter


def test_bilinear_resize_gradient():
    x = Tensor(RngState(8).normal((1, 2, 2)), requires_grad=True)
    weights = Tensor(RngState(9).normal((1, 6, 6)))
    report = finite_diff_check(lambda: (resize_bilinear(x, 6, 6) * weights).sum(), {"x": x})
    assert report.passed
