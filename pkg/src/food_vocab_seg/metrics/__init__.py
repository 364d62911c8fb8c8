"""Segmentation scoring over base, novel and all classes."""

from food_vocab_seg.metrics.models import AggregateReport, MetricsReport, MetricSummary
from food_vocab_seg.metrics.scoring import (
    ConfusionCounts,
    accumulate,
    aggregate_reports,
    confusion_counts,
    format_aggregate,
    format_table,
    summarize,
)

__all__ = [
    "AggregateReport",
    "ConfusionCounts",
    "MetricSummary",
    "MetricsReport",
    "accumulate",
    "aggregate_reports",
    "confusion_counts",
    "format_aggregate",
    "format_table",
    "summarize",
]
