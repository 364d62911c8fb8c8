import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from food_vocab_seg.errors import InvalidInputError, MatchingError, ShapeError
from food_vocab_seg.numcore import RngState, Tensor, finite_diff_check
from food_vocab_seg.segmentation import (
    ProposalSet,
    SegTargets,
    Stage2Config,
    dice_cost_matrix,
    dice_loss,
    hungarian_assignment,
    match_proposals,
    stage2_loss,
)


def test_dice_hand_case():
    pred = Tensor(np.array([1.0, 1.0, 0.0, 0.0]))
    gt = np.array([0.0, 1.0, 1.0, 0.0])
    assert dice_loss(pred, gt, smooth=0.0).item() == pytest.approx(0.5)


def test_dice_perfect_and_empty():
    gt = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert dice_loss(Tensor(gt), gt).item() == pytest.approx(0.0)
    assert dice_loss(Tensor(np.zeros((2, 2))), np.zeros((2, 2))).item() == pytest.approx(0.0)
    with pytest.raises(InvalidInputError):
        dice_loss(Tensor(np.zeros((2, 2))), np.zeros((2, 2)), smooth=0.0)


def test_dice_shape_mismatch():
    with pytest.raises(ShapeError):
        dice_loss(Tensor(np.zeros(3)), np.zeros(4))


@given(st.integers(0, 10_000))
def test_dice_is_symmetric_and_bounded(seed):
    rng = RngState(seed)
    p = (rng.uniform((4, 4)) > 0.5).astype(np.float64)
    g = (rng.uniform((4, 4)) > 0.5).astype(np.float64)
    value = dice_loss(Tensor(p), g).item()
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(dice_loss(Tensor(g), p).item())


def test_cost_matrix_matches_pairwise_dice():
    rng = RngState(0)
    pred = rng.uniform((3, 4, 4))
    gt = (rng.uniform((2, 4, 4)) > 0.5).astype(np.float64)
    costs = dice_cost_matrix(pred, gt)
    for p, g in itertools.product(range(3), range(2)):
        assert costs[p, g] == pytest.approx(dice_loss(Tensor(pred[p]), gt[g]).item())


def test_hungarian_hand_cases():
    result = hungarian_assignment(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert result.as_dict() == {0: 0, 1: 1}
    assert result.cost == 2.0
    assert hungarian_assignment(np.array([[5.0], [1.0], [7.0]])).as_dict() == {1: 0}


def test_hungarian_errors():
    with pytest.raises(MatchingError):
        hungarian_assignment(np.ones((1, 2)))
    with pytest.raises(MatchingError):
        hungarian_assignment(np.array([[np.nan], [1.0]]))
    with pytest.raises(ShapeError):
        hungarian_assignment(np.ones(3))


@given(
    n_proposals=st.integers(2, 6),
    n_targets=st.integers(1, 6),
    seed=st.integers(0, 10_000),
)
def test_hungarian_equals_exhaustive_search(n_proposals, n_targets, seed):
    n_targets = min(n_targets, n_proposals)
    cost = RngState(seed).uniform((n_proposals, n_targets), 0.0, 10.0)
    best = min(
        sum(cost[rows[t], t] for t in range(n_targets))
        for rows in itertools.permutations(range(n_proposals), n_targets)
    )
    result = hungarian_assignment(cost)
    assert result.cost == pytest.approx(best)
    assert len(set(result.proposal_index.tolist())) == n_targets
    assert result.target_index.tolist() == list(range(n_targets))


def two_region_targets():
    mask = np.zeros((2, 4, 4))
    mask[0, :2] = 1.0
    mask[1, 2:] = 1.0
    return SegTargets(gt_class=np.array([0, 1]), gt_mask=mask)


def proposal_set(seed, n_proposals=3, n_classes=2, requires_grad=False):
    rng = RngState(seed)
    return ProposalSet(
        tokens=Tensor(rng.normal((1, n_proposals, 4))),
        mask_logits=Tensor(rng.normal((1, n_proposals, 4, 4)), requires_grad=requires_grad),
        class_logits=Tensor(rng.normal((1, n_proposals, n_classes + 1)), requires_grad=requires_grad),
    )


def test_matching_prefers_fitting_masks():
    proposals = proposal_set(0)
    targets = two_region_targets()
    proposals.mask_logits.data[0] = -20.0
    proposals.mask_logits.data[0, 2, :2] = 20.0
    proposals.mask_logits.data[0, 0, 2:] = 20.0
    proposals.class_logits.data[:] = 0.0
    assert match_proposals(proposals, targets).as_dict() == {2: 0, 0: 1}


def test_no_regions_trains_every_proposal_to_no_object():
    proposals = proposal_set(1)
    empty = SegTargets(np.zeros(0, dtype=np.int64), np.zeros((0, 4, 4)))
    loss = stage2_loss(proposals, empty, Stage2Config())
    assert loss.l_dice.item() == 0.0
    assert loss.match.proposal_index.size == 0
    assert loss.total.item() == pytest.approx(loss.l_cls.item())


def test_more_regions_than_proposals():
    with pytest.raises(MatchingError):
        stage2_loss(proposal_set(2, n_proposals=1), two_region_targets(), Stage2Config())


@pytest.mark.parametrize("seed", range(5))
def test_stage2_loss_gradient(seed):
    proposals = proposal_set(seed, requires_grad=True)
    targets = two_region_targets()
    config = Stage2Config()
    report = finite_diff_check(
        lambda: stage2_loss(proposals, targets, config).total,
        {"mask_logits": proposals.mask_logits, "class_logits": proposals.class_logits},
    )
    assert report.passed, report.per_parameter


def test_targets_reject_overlap():
    with pytest.raises(ShapeError):
        SegTargets(np.array([0, 1]), np.ones((2, 2, 2)))


def test_targets_from_mask_skip_unknown_classes():
    mask = np.array([[0, 1, 1, 3], [0, 1, 2, 3], [0, 0, 2, 3], [0, 0, 2, 3]])
    targets = SegTargets.from_mask(mask, {1: 0, 3: 1}, size=4)
    assert targets.gt_class.tolist() == [0, 1]
    assert targets.gt_mask[0].sum() == 3
    assert targets.gt_mask[1].sum() == 4
