"""AdamW with decoupled weight decay and learning-rate schedules."""

import logging
import math
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from food_vocab_seg.errors import ArchiveError, NonFiniteError
from food_vocab_seg.numcore.nn import Parameter

logger = logging.getLogger(__name__)


class AdamW:
    """Adaptive-moment optimizer with weight decay applied directly to the weights.

    Decay is applied to matrices and embeddings (``ndim >= 2``) only; biases and
    normalisation gains are left undecayed.
    """

    def __init__(
        self,
        named_params: Sequence[Tuple[str, Parameter]],
        weight_decay: float = 0.0,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params: Dict[str, Parameter] = dict(named_params)
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.exp_avg = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.exp_avg_sq = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, lr: float) -> None:
        """Apply one update at learning rate ``lr`` to every parameter with a gradient."""
        self.step_count += 1
        bias1 = 1.0 - self.beta1 ** self.step_count
        bias2 = 1.0 - self.beta2 ** self.step_count

        for name, p in self.params.items():
            if p.grad is None or not p.requires_grad:
                continue
            grad = p.grad
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(f"Non-finite gradient for {name} at step {self.step_count}")

            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad

            if self.weight_decay and p.ndim >= 2:
                p.data *= 1.0 - lr * self.weight_decay
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {}
        for name in self.params:
            state[f"exp_avg.{name}"] = self.exp_avg[name].copy()
            state[f"exp_avg_sq.{name}"] = self.exp_avg_sq[name].copy()
        state["step_count"] = np.array([float(self.step_count)])
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        try:
            for name in self.params:
                self.exp_avg[name] = np.array(state[f"exp_avg.{name}"], dtype=np.float64)
                self.exp_avg_sq[name] = np.array(state[f"exp_avg_sq.{name}"], dtype=np.float64)
            self.step_count = int(state["step_count"][0])
        except KeyError as e:
            raise ArchiveError(f"Optimizer state is missing {e}") from e


def warmup_cosine_lr(
    step: int,
    total_steps: int,
    warmup_steps: int,
    lr_start: float,
    lr_peak: float,
    lr_end: float,
) -> float:
    """Linear warmup from ``lr_start`` to ``lr_peak``, then cosine decay to ``lr_end``.

    Step 0 returns ``lr_start``; step ``warmup_steps`` returns ``lr_peak``.
    """
    if warmup_steps > 0 and step < warmup_steps:
        return lr_start + (lr_peak - lr_start) * step / warmup_steps
    decay_steps = max(total_steps - warmup_steps, 1)
    progress = min(max(step - warmup_steps, 0) / decay_steps, 1.0)
    return lr_end + 0.5 * (lr_peak - lr_end) * (1.0 + math.cos(math.pi * progress))


def poly_lr(step: int, total_steps: int, base_lr: float, power: float = 0.9, min_lr: float = 0.0) -> float:
    """Polynomial decay ``base_lr * (1 - step / total) ** power``, floored at ``min_lr``."""
    progress = min(step / max(total_steps, 1), 1.0)
    return max((base_lr - min_lr) * (1.0 - progress) ** power + min_lr, min_lr)
