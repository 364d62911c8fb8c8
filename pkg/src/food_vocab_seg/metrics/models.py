"""Report models for segmentation scoring."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class MetricsReport(BaseModel):
    """Dataset-level scores; subset means are None when the subset has no scored class."""
    miou_novel: Optional[float] = Field(None, ge=0, le=1)
    miou_base: Optional[float] = Field(None, ge=0, le=1)
    miou_all: float = Field(..., ge=0, le=1)
    macc: float = Field(..., ge=0, le=1)
    pacc: float = Field(..., ge=0, le=1)
    per_class: Dict[str, float] = Field(default_factory=dict, description="IoU of every scored class")
    novel_classes: List[str] = Field(default_factory=list)
    base_classes: List[str] = Field(default_factory=list)
    split_id: Optional[int] = None
    seed: Optional[int] = None
    run: Dict[str, str] = Field(default_factory=dict, description="Free-form run metadata")


class MetricSummary(BaseModel):
    mean: Optional[float] = None
    std: Optional[float] = None
    runs: int = 0


class AggregateReport(BaseModel):
    """Mean and standard deviation of the headline metrics across runs."""
    runs: int
    miou_novel: MetricSummary
    miou_base: MetricSummary
    miou_all: MetricSummary
    macc: MetricSummary
    pacc: MetricSummary
