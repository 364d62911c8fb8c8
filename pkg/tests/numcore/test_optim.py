import numpy as np
import pytest

from food_vocab_seg.errors import ArchiveError, NonFiniteError
from food_vocab_seg.numcore import AdamW, Parameter, poly_lr, warmup_cosine_lr


def test_warmup_cosine_endpoints():
    schedule = dict(total_steps=100, warmup_steps=10, lr_start=1e-6, lr_peak=1e-4, lr_end=1e-5)
    assert warmup_cosine_lr(0, **schedule) == pytest.approx(1e-6)
    assert warmup_cosine_lr(10, **schedule) == pytest.approx(1e-4)
    assert warmup_cosine_lr(100, **schedule) == pytest.approx(1e-5)
    assert warmup_cosine_lr(55, **schedule) == pytest.approx((1e-4 + 1e-5) / 2)


def test_warmup_is_linear():
    lrs = [warmup_cosine_lr(s, 100, 10, 0.0, 1.0, 0.0) for s in range(11)]
    assert np.allclose(np.diff(lrs), 0.1)


def test_poly_schedule():
    assert poly_lr(0, 100, 1e-4) == pytest.approx(1e-4)
    assert poly_lr(50, 100, 1e-4) == pytest.approx(1e-4 * 0.5 ** 0.9)
    assert poly_lr(100, 100, 1e-4) == 0.0


def test_adamw_first_step_moves_by_lr():
    w = Parameter(np.array([[1.0, -2.0]]))
    b = Parameter(np.array([3.0]))
    optimizer = AdamW([("w", w), ("b", b)])
    w.grad = np.array([[0.5, -4.0]])
    b.grad = np.array([1.0])
    optimizer.step(0.1)
    assert np.allclose(w.data, [[0.9, -1.9]])
    assert np.allclose(b.data, [2.9])


def test_weight_decay_skips_vectors():
    w = Parameter(np.ones((2, 2)))
    b = Parameter(np.ones(2))
    optimizer = AdamW([("w", w), ("b", b)], weight_decay=0.5)
    w.grad = np.zeros((2, 2))
    b.grad = np.zeros(2)
    optimizer.step(0.1)
    assert np.allclose(w.data, 0.95)
    assert np.allclose(b.data, 1.0)


def test_non_finite_gradient_aborts():
    w = Parameter(np.ones(2))
    optimizer = AdamW([("w", w)])
    w.grad = np.array([np.inf, 0.0])
    with pytest.raises(NonFiniteError):
        optimizer.step(0.1)


def test_state_round_trip_resumes_identically():
    def run(steps, resume_from=None):
        w = Parameter(np.array([1.0, 2.0]))
        optimizer = AdamW([("w", w)])
        if resume_from is not None:
            w.data = resume_from[0].copy()
            optimizer.load_state_dict(resume_from[1])
        for step in range(steps):
            w.grad = w.data * 2.0
            optimizer.step(0.01)
        return w.data.copy(), optimizer.state_dict()

    straight, _ = run(6)
    half = run(3)
    resumed, _ = run(3, resume_from=half)
    assert np.array_equal(straight, resumed)


def test_incomplete_state_is_rejected():
    optimizer = AdamW([("w", Parameter(np.ones(2)))])
    with pytest.raises(ArchiveError):
        optimizer.load_state_dict({"step_count": np.array([1.0])})
