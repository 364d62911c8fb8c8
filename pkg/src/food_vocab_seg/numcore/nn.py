"""Parameter containers and transformer building blocks."""

import logging
from typing import Dict, Iterator, List, Mapping, Optional, Tuple

import numpy as np

from food_vocab_seg.errors import ArchiveError, ShapeError
from food_vocab_seg.numcore.functional import layer_norm
from food_vocab_seg.numcore.rng import RngState
from food_vocab_seg.numcore.tensor import Tensor, concat, matmul, softmax

logger = logging.getLogger(__name__)

MASKED_SCORE = -1e9


class Parameter(Tensor):
    """A tensor owned by a module and updated by an optimizer."""

    def __init__(self, data, requires_grad: bool = True, name: Optional[str] = None):
        super().__init__(data, requires_grad=requires_grad, name=name)


class Module:
    """Base class that discovers parameters and submodules from attributes.

    Attribute order is definition order, so dotted names and archive layout are
    stable across runs.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}.{attr}" if prefix else attr
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name)
            elif isinstance(value, (list, tuple)):
                for index, item in enumerate(value):
                    if isinstance(item, Parameter):
                        yield f"{name}.{index}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{index}")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def freeze(self) -> "Module":
        """Stop gradients from reaching any parameter of this module."""
        for p in self.parameters():
            p.requires_grad = False
            p.zero_grad()
        return self

    def unfreeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = True
        return self

    @property
    def frozen(self) -> bool:
        return all(not p.requires_grad for p in self.parameters())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        """Copy arrays into parameters with shape validation.

        Raises:
            ArchiveError: On missing, unexpected or mis-shaped entries
        """
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if strict and (missing or unexpected):
            raise ArchiveError(f"State mismatch: missing={missing[:5]} unexpected={unexpected[:5]}")
        for name, param in own.items():
            if name not in state:
                continue
            array = np.asarray(state[name], dtype=np.float64)
            if array.shape != param.shape:
                raise ArchiveError(f"Shape mismatch for {name}: archive {array.shape}, model {param.shape}")
            param.data = array.copy()


class Linear(Module):
    """Affine map ``x @ weight + bias`` with Xavier-uniform initialisation."""

    def __init__(self, d_in: int, d_out: int, rng: RngState, bias: bool = True, std: Optional[float] = None):
        if std is None:
            limit = np.sqrt(6.0 / (d_in + d_out))
            weight = rng.uniform((d_in, d_out), -limit, limit)
        else:
            weight = rng.normal((d_in, d_out), std)
        self.weight = Parameter(weight)
        self.bias = Parameter(np.zeros(d_out)) if bias else None
        self.d_in = d_in
        self.d_out = d_out

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"Linear expects last dim {self.d_in}, got {x.shape}")
        out = matmul(x, self.weight) if x.ndim >= 2 else matmul(x.reshape(1, -1), self.weight).reshape(-1)
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    """Lookup table of ``n`` vectors."""

    def __init__(self, n: int, dim: int, rng: RngState, std: float = 0.02):
        self.weight = Parameter(rng.normal((n, dim), std))

    def __call__(self, ids: np.ndarray) -> Tensor:
        return self.weight[np.asarray(ids, dtype=np.int64)]


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: RngState):
        self.fc1 = Linear(dim, hidden, rng.child("fc1"))
        self.fc2 = Linear(hidden, dim, rng.child("fc2"))

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).gelu())


class MultiHeadAttention(Module):
    """Scaled dot-product attention over ``n_heads`` heads.

    Queries come from ``x``; keys and values from ``context`` (``x`` when absent).
    ``allowed`` is a boolean [.., N, M] matrix of permitted query/key pairs and
    ``bias`` an additive [.., N, M] tensor (e.g. learned attention biases).
    """

    def __init__(self, dim: int, n_heads: int, rng: RngState, context_dim: Optional[int] = None):
        if dim % n_heads != 0:
            raise ShapeError(f"dim {dim} is not divisible by {n_heads} heads")
        context_dim = context_dim or dim
        self.to_q = Linear(dim, dim, rng.child("q"))
        self.to_k = Linear(context_dim, dim, rng.child("k"))
        self.to_v = Linear(context_dim, dim, rng.child("v"))
        self.to_out = Linear(dim, dim, rng.child("out"))
        self.n_heads = n_heads
        self.head_dim = dim // n_heads

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.reshape(batch, length, self.n_heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(
        self,
        x: Tensor,
        context: Optional[Tensor] = None,
        allowed: Optional[np.ndarray] = None,
        bias: Optional[Tensor] = None,
    ) -> Tensor:
        context = x if context is None else context
        if x.ndim != 3 or context.ndim != 3 or x.shape[0] != context.shape[0]:
            raise ShapeError(f"attention expects [B, N, d] inputs, got {x.shape} and {context.shape}")
        batch, length, dim = x.shape

        q = self._split(self.to_q(x))
        k = self._split(self.to_k(context))
        v = self._split(self.to_v(context))
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(self.head_dim))

        if bias is not None:
            scores = scores + (bias if bias.ndim < 3 else bias.reshape(bias.shape[0], 1, *bias.shape[1:]))
        if allowed is not None:
            allowed = np.asarray(allowed, dtype=bool)
            if not np.all(allowed.any(axis=-1)):
                raise ShapeError("attention mask leaves a query with no visible keys")
            penalty = np.where(allowed, 0.0, MASKED_SCORE)
            if penalty.ndim == 3:
                penalty = penalty[:, None, :, :]
            scores = scores + Tensor(penalty)

        weights = softmax(scores, axis=-1)
        out = matmul(weights, v).transpose(0, 2, 1, 3).reshape(batch, length, dim)
        return self.to_out(out)


class TransformerBlock(Module):
    """Pre-norm block: self-attention, optional cross-attention, feed-forward.

    Cross-attention, when configured and given a context, updates only the first
    ``cross_rows`` positions; the remaining rows skip it.
    """

    def __init__(
        self,
        dim: int,
        n_heads: int,
        rng: RngState,
        mlp_ratio: int = 4,
        context_dim: Optional[int] = None,
    ):
        self.norm_self = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(dim, n_heads, rng.child("self_attn"))
        if context_dim is not None:
            self.norm_cross = LayerNorm(dim)
            self.cross_attn = MultiHeadAttention(dim, n_heads, rng.child("cross_attn"), context_dim)
        else:
            self.norm_cross = None
            self.cross_attn = None
        self.norm_ffn = LayerNorm(dim)
        self.ffn = FeedForward(dim, dim * mlp_ratio, rng.child("ffn"))

    def __call__(
        self,
        x: Tensor,
        allowed: Optional[np.ndarray] = None,
        context: Optional[Tensor] = None,
        cross_rows: Optional[int] = None,
        cross_bias: Optional[Tensor] = None,
    ) -> Tensor:
        x = x + self.self_attn(self.norm_self(x), allowed=allowed)

        if context is not None and self.cross_attn is not None:
            rows = x.shape[1] if cross_rows is None else cross_rows
            if rows == x.shape[1]:
                x = x + self.cross_attn(self.norm_cross(x), context=context, bias=cross_bias)
            elif rows > 0:
                head = x[:, :rows]
                head = head + self.cross_attn(self.norm_cross(head), context=context, bias=cross_bias)
                x = concat([head, x[:, rows:]], axis=1)

        return x + self.ffn(self.norm_ffn(x))
