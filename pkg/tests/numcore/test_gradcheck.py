import numpy as np
import pytest

from food_vocab_seg.errors import GradCheckError
from food_vocab_seg.numcore import RngState, Tensor, finite_diff_check


def test_exact_gradient_passes():
    x = Tensor(RngState(0).normal((3,)), requires_grad=True)
    report = finite_diff_check(lambda: (x * x * x).sum(), {"x": x})
    assert report.passed
    assert report.checked_entries == 3
    assert report.max_error < 1e-6


def test_corrupted_gradient_fails():
    x = Tensor(RngState(1).normal((4,)), requires_grad=True)
    report = finite_diff_check(
        lambda: (x * x).sum(),
        {"x": x},
        gradient_override=lambda name, grad: grad * 1.01,
    )
    assert not report.passed
    assert report.per_parameter["x"] > 1e-4


def test_entry_sampling_limits_work():
    x = Tensor(RngState(2).normal((10, 10)), requires_grad=True)
    report = finite_diff_check(lambda: (x * x).sum(), [("x", x)], max_entries=5)
    assert report.checked_entries == 5


def test_parameters_are_restored():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    finite_diff_check(lambda: (x * x).sum(), {"x": x})
    assert np.array_equal(x.data, [1.0, 2.0])


def test_frozen_parameter_is_rejected():
    x = Tensor([1.0])
    with pytest.raises(GradCheckError):
        finite_diff_check(lambda: x.sum(), {"x": x})


def test_non_scalar_function_is_rejected():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(GradCheckError):
        finite_diff_check(lambda: x * 2.0, {"x": x})
