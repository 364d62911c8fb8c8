"""Central finite-difference verification of analytic gradients."""

import logging
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from food_vocab_seg.config import GRADCHECK_STEP, GRADCHECK_TOL
from food_vocab_seg.errors import GradCheckError, NonFiniteError
from food_vocab_seg.numcore.rng import RngState
from food_vocab_seg.numcore.tensor import Tensor

logger = logging.getLogger(__name__)

# Denominator floor so gradients that are zero up to round-off compare absolutely
RELATIVE_FLOOR = 1e-3

ParamsArg = Union[Mapping[str, Tensor], Sequence[Tuple[str, Tensor]]]
GradientOverride = Callable[[str, np.ndarray], np.ndarray]


class GradCheckReport(BaseModel):
    """Outcome of a finite-difference check."""
    max_error: float = Field(..., ge=0, description="Largest relative error over all checked entries")
    per_parameter: Dict[str, float] = Field(..., description="Largest relative error per parameter")
    checked_entries: int = Field(..., ge=0, description="Number of scalar entries compared")
    tolerance: float = Field(..., gt=0, description="Pass threshold on max_error")
    step: float = Field(..., gt=0, description="Central-difference step")
    passed: bool = Field(..., description="max_error <= tolerance")


def _evaluate(f: Callable[[], Tensor]) -> float:
    try:
        value = f()
    except NonFiniteError as e:
        raise GradCheckError(f"Function under test is not finite: {e}") from e
    value = float(value.item()) if isinstance(value, Tensor) else float(value)
    if not np.isfinite(value):
        raise GradCheckError("Function under test returned a non-finite value")
    return value


def finite_diff_check(
    f: Callable[[], Tensor],
    params: ParamsArg,
    step: float = GRADCHECK_STEP,
    tol: float = GRADCHECK_TOL,
    max_entries: Optional[int] = None,
    rng: Optional[RngState] = None,
    gradient_override: Optional[GradientOverride] = None,
) -> GradCheckReport:
    """Compare backward-pass gradients of ``f`` with central differences.

    Args:
        f: Zero-argument function rebuilding the scalar loss from ``params``
        params: Named tensors with ``requires_grad`` set
        step: Perturbation size h in (f(x+h) - f(x-h)) / 2h
        tol: Largest relative error that still passes
        max_entries: Check at most this many randomly chosen entries per parameter
        rng: Stream used to pick entries when ``max_entries`` is set
        gradient_override: Hook that replaces an analytic gradient (negative controls)

    Returns:
        GradCheckReport with per-parameter errors

    Raises:
        GradCheckError: If ``f`` is not finite or a parameter does not require grad
    """
    named = list(params.items()) if isinstance(params, Mapping) else list(params)
    for name, p in named:
        if not p.requires_grad:
            raise GradCheckError(f"Parameter {name} does not require grad")
        p.zero_grad()

    loss = f()
    if not isinstance(loss, Tensor) or loss.size != 1:
        raise GradCheckError("f must return a single-value tensor")
    if not np.isfinite(loss.item()):
        raise GradCheckError("Function under test returned a non-finite value")
    loss.backward()

    analytic: Dict[str, np.ndarray] = {}
    for name, p in named:
        grad = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        analytic[name] = gradient_override(name, grad) if gradient_override else grad

    per_parameter: Dict[str, float] = {}
    checked = 0
    for name, p in named:
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            picker = rng or RngState(0).child(name)
            indices = np.sort(picker.choice(flat.size, max_entries, replace=False))

        worst = 0.0
        for index in indices:
            original = flat[index]
            flat[index] = original + step
            plus = _evaluate(f)
            flat[index] = original - step
            minus = _evaluate(f)
            flat[index] = original

            numeric = (plus - minus) / (2.0 * step)
            exact = analytic[name].reshape(-1)[index]
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), RELATIVE_FLOOR)
            worst = max(worst, error)
            checked += 1
        per_parameter[name] = worst

    max_error = max(per_parameter.values(), default=0.0)
    report = GradCheckReport(
        max_error=max_error,
        per_parameter=per_parameter,
        checked_entries=checked,
        tolerance=tol,
        step=step,
        passed=max_error <= tol,
    )
    if not report.passed:
        logger.warning(f"Gradient check failed: max relative error {max_error:.3e} > {tol:.1e}")
    return report
