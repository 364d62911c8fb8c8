"""Dice and matched cross-entropy objectives with bipartite proposal matching."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from food_vocab_seg.errors import InvalidInputError, MatchingError, ShapeError
from food_vocab_seg.numcore import Tensor, as_tensor, log_softmax, nll_from_log_probs, no_grad
from food_vocab_seg.segmentation.models import MatchResult, ProposalSet, SegTargets, Stage2Config

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Stage2Loss:
    l_cls: Tensor
    l_dice: Tensor
    total: Tensor
    match: MatchResult


def dice_loss(pred_mask_probs: Tensor, gt_mask: np.ndarray, smooth: float = 1.0) -> Tensor:
    """``1 - (2 * sum(p * g) + smooth) / (sum(p) + sum(g) + smooth)``.

    Raises:
        ShapeError: If the shapes differ
        InvalidInputError: If both masks are empty and ``smooth`` is zero
    """
    pred = as_tensor(pred_mask_probs)
    gt = np.asarray(gt_mask, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    denominator = pred.sum() + float(gt.sum()) + smooth
    if denominator.item() == 0.0:
        raise InvalidInputError("dice of two empty masks is undefined without smoothing")
    return 1.0 - ((pred * Tensor(gt)).sum() * 2.0 + smooth) / denominator


def dice_cost_matrix(pred_mask_probs: np.ndarray, gt_masks: np.ndarray, smooth: float = 1.0) -> np.ndarray:
    """Dice loss of every (proposal, target) pair, [N_p, R]."""
    pred = pred_mask_probs.reshape(pred_mask_probs.shape[0], -1)
    gt = gt_masks.reshape(gt_masks.shape[0], -1)
    inter = pred @ gt.T
    total = pred.sum(axis=1)[:, None] + gt.sum(axis=1)[None, :]
    return 1.0 - (2.0 * inter + smooth) / (total + smooth)


def hungarian_assignment(cost: np.ndarray) -> MatchResult:
    """Minimum-cost assignment of every column (target) to a distinct row (proposal).

    Raises:
        MatchingError: If there are more targets than proposals
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ShapeError(f"cost matrix must be 2-D, got {cost.shape}")
    n_proposals, n_targets = cost.shape
    if n_targets > n_proposals:
        raise MatchingError(f"{n_targets} targets cannot be matched to {n_proposals} proposals")
    if not np.all(np.isfinite(cost)):
        raise MatchingError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    order = np.argsort(cols)
    rows, cols = rows[order], cols[order]
    return MatchResult(proposal_index=rows, target_index=cols, cost=float(cost[rows, cols].sum()))


def matching_cost(proposals: ProposalSet, targets: SegTargets, config: Stage2Config) -> np.ndarray:
    """``class_weight * -log P_cls[gt] + dice_weight * dice`` for one image, [N_p, R]."""
    if proposals.batch_size != 1:
        raise ShapeError("matching works on one image at a time")
    with no_grad():
        log_probs = log_softmax(proposals.class_logits, axis=-1).numpy()[0]
        mask_probs = proposals.mask_logits.sigmoid().numpy()[0]
    class_cost = -log_probs[:, targets.gt_class]
    dice_cost = dice_cost_matrix(mask_probs, targets.gt_mask, config.dice_smooth)
    return config.class_weight * class_cost + config.dice_weight * dice_cost


def match_proposals(proposals: ProposalSet, targets: SegTargets, config: Optional[Stage2Config] = None) -> MatchResult:
    """Assign each ground-truth region to one proposal; the rest become no-object."""
    config = config or Stage2Config()
    if targets.num_regions == 0:
        return MatchResult(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), 0.0)
    return hungarian_assignment(matching_cost(proposals, targets, config))


def stage2_loss(proposals: ProposalSet, targets: SegTargets, config: Stage2Config) -> Stage2Loss:
    """Matched CE plus Dice for one image.

    Matched proposals are trained towards their region's class and mask;
    unmatched proposals towards no-object with weight ``no_object_weight``.
    """
    match = match_proposals(proposals, targets, config)
    n_proposals, no_object = proposals.num_proposals, proposals.num_classes

    labels = np.full(n_proposals, no_object, dtype=np.int64)
    weights = np.full(n_proposals, config.no_object_weight)
    labels[match.proposal_index] = targets.gt_class[match.target_index]
    weights[match.proposal_index] = 1.0

    log_probs = log_softmax(proposals.class_logits[0], axis=-1)
    l_cls = nll_from_log_probs(log_probs, labels, weights)

    if match.proposal_index.size:
        mask_probs = proposals.mask_logits[0][match.proposal_index].sigmoid()
        gt = targets.gt_mask[match.target_index]
        terms = [dice_loss(mask_probs[k], gt[k], config.dice_smooth) for k in range(gt.shape[0])]
        l_dice = terms[0]
        for term in terms[1:]:
            l_dice = l_dice + term
        l_dice = l_dice * (1.0 / len(terms))
    else:
        l_dice = Tensor(0.0)

    total = l_cls * config.class_weight + l_dice * config.dice_weight
    return Stage2Loss(l_cls=l_cls, l_dice=l_dice, total=total, match=match)
