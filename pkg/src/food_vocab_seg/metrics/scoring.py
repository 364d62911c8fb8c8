"""Confusion counting and mIoU / mAcc / pAcc summaries."""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from food_vocab_seg.config import BACKGROUND_CLASS
from food_vocab_seg.datagen.models import ClassSplit
from food_vocab_seg.errors import InvalidInputError, ShapeError
from food_vocab_seg.metrics.models import AggregateReport, MetricSummary, MetricsReport

logger = logging.getLogger(__name__)

HEADLINE = ("miou_novel", "miou_base", "miou_all", "macc", "pacc")


@dataclass(frozen=True)
class ConfusionCounts:
    """Integer confusion matrix, rows = ground truth, columns = prediction."""
    matrix: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.matrix.shape[0]

    @property
    def intersection(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def gt_count(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    @property
    def pred_count(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def union(self) -> np.ndarray:
        return self.gt_count + self.pred_count - self.intersection

    @property
    def correct(self) -> int:
        return int(self.intersection.sum())

    @property
    def total(self) -> int:
        return int(self.matrix.sum())

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        if other.matrix.shape != self.matrix.shape:
            raise ShapeError(f"cannot add counts over {self.n_classes} and {other.n_classes} classes")
        return ConfusionCounts(self.matrix + other.matrix)

    @classmethod
    def zeros(cls, n_classes: int) -> "ConfusionCounts":
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))


def confusion_counts(
    pred: np.ndarray,
    gt: np.ndarray,
    n_classes: int,
    include_background: bool = False,
) -> ConfusionCounts:
    """Count (gt, pred) pixel pairs; background ground truth is skipped by default.

    Raises:
        ShapeError: If the maps differ in shape
        InvalidInputError: If a class index is outside ``[0, n_classes)``
    """
    pred, gt = np.asarray(pred, dtype=np.int64), np.asarray(gt, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    for name, values in (("prediction", pred), ("ground truth", gt)):
        if values.size and (values.min() < 0 or values.max() >= n_classes):
            raise InvalidInputError(f"{name} holds a class index outside [0, {n_classes})")
    keep = np.ones(gt.shape, dtype=bool) if include_background else gt != 0
    flat = n_classes * gt[keep] + pred[keep]
    return ConfusionCounts(np.bincount(flat, minlength=n_classes ** 2).reshape(n_classes, n_classes))


def accumulate(
    preds: Iterable[np.ndarray],
    gts: Iterable[np.ndarray],
    n_classes: int,
    include_background: bool = False,
) -> ConfusionCounts:
    """Sum of per-image counts over an evaluation set."""
    total = ConfusionCounts.zeros(n_classes)
    for pred, gt in zip(preds, gts):
        total = total + confusion_counts(pred, gt, n_classes, include_background)
    return total


def _mean(values: List[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


def summarize(
    counts: ConfusionCounts,
    class_names: Sequence[str],
    novel_classes: Union[ClassSplit, Sequence[str]] = (),
    include_background: bool = False,
    split_id: Optional[int] = None,
    seed: Optional[int] = None,
    run: Optional[Dict[str, str]] = None,
) -> MetricsReport:
    """Dataset-level IoU per class and subset means.

    Classes whose union is empty are excluded from every mean; background is
    scored only with ``include_background``.

    Args:
        counts: Counts accumulated over the whole evaluation set
        class_names: Name of every class index
        novel_classes: Held-out classes, or a split whose novel list is used
        include_background: Score class 0 as well
        split_id: Index of the split among several
        seed: Seed of the run
        run: Extra metadata echoed into the report

    Raises:
        InvalidInputError: If no pixel was counted
    """
    if len(class_names) != counts.n_classes:
        raise ShapeError(f"{len(class_names)} names for {counts.n_classes} classes")
    if counts.total == 0:
        raise InvalidInputError("empty evaluation set")

    if isinstance(novel_classes, ClassSplit):
        seed = novel_classes.seed if seed is None else seed
        novel_classes = novel_classes.novel
    novel = set(novel_classes)
    scored = [c for c, name in enumerate(class_names) if include_background or name != BACKGROUND_CLASS]
    union, inter, gt_count = counts.union, counts.intersection, counts.gt_count
    per_class = {class_names[c]: inter[c] / union[c] for c in scored if union[c] > 0}

    report = MetricsReport(
        miou_novel=_mean([v for k, v in per_class.items() if k in novel]),
        miou_base=_mean([v for k, v in per_class.items() if k not in novel]),
        miou_all=_mean(list(per_class.values())) or 0.0,
        macc=_mean([inter[c] / gt_count[c] for c in scored if gt_count[c] > 0]) or 0.0,
        pacc=counts.correct / counts.total,
        per_class={k: float(v) for k, v in per_class.items()},
        novel_classes=[name for name in class_names if name in novel],
        base_classes=[class_names[c] for c in scored if class_names[c] not in novel],
        split_id=split_id,
        seed=seed,
        run=dict(run or {}),
    )
    logger.debug(f"Scored {len(per_class)} classes over {counts.total} pixels")
    return report


def aggregate_reports(reports: Sequence[MetricsReport]) -> AggregateReport:
    """Mean and population standard deviation of each headline metric; missing values skipped.

    Raises:
        InvalidInputError: If ``reports`` is empty
    """
    if not reports:
        raise InvalidInputError("no reports to aggregate")
    summaries = {}
    for key in HEADLINE:
        values = [getattr(r, key) for r in reports if getattr(r, key) is not None]
        summaries[key] = MetricSummary(
            mean=float(np.mean(values)) if values else None,
            std=float(np.std(values)) if values else None,
            runs=len(values),
        )
    return AggregateReport(runs=len(reports), **summaries)


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{100 * value:6.2f}"


def format_table(report: MetricsReport) -> str:
    """Plain-text table of headline metrics followed by per-class IoU."""
    lines = [
        f"{'metric':<12}{'value':>8}",
        "-" * 20,
    ]
    for key in HEADLINE:
        lines.append(f"{key:<12}{_fmt(getattr(report, key)):>8}")
    lines += ["", f"{'class':<16}{'set':<7}{'IoU':>8}", "-" * 31]
    novel = set(report.novel_classes)
    for name, value in report.per_class.items():
        lines.append(f"{name:<16}{'novel' if name in novel else 'base':<7}{_fmt(value):>8}")
    return "\n".join(lines)


def format_aggregate(aggregate: AggregateReport) -> str:
    lines = [f"{'metric':<12}{'mean':>8}{'std':>8}{'runs':>6}", "-" * 34]
    for key in HEADLINE:
        summary: MetricSummary = getattr(aggregate, key)
        lines.append(f"{key:<12}{_fmt(summary.mean):>8}{_fmt(summary.std):>8}{summary.runs:>6}")
    return "\n".join(lines)
