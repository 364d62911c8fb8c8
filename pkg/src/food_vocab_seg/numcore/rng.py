"""Seeded random streams; the only source of randomness in the package."""

import zlib
from typing import Sequence, Tuple, Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, int):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return key
    return zlib.crc32(key.encode("utf-8"))


class RngState:
    """A PCG64 stream identified by a 64-bit seed and a path of stream keys.

    Identical seed and identical sequence of draws give bit-identical values.
    ``child`` derives an independent stream without consuming draws from this one,
    so per-sample and per-module streams do not depend on call order.
    """

    def __init__(self, seed: int, stream: Sequence[int] = ()):
        if not 0 <= int(seed) < 2 ** 64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.stream: Tuple[int, ...] = tuple(int(s) for s in stream)
        self.draws = 0
        sequence = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        self._generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, key: Key) -> "RngState":
        """Return the independent stream named ``key`` below this one."""
        return RngState(self.seed, self.stream + (_key_to_int(key),))

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream}, draws={self.draws})"

    def normal(self, shape: Sequence[int], std: float = 1.0, mean: float = 0.0) -> np.ndarray:
        self.draws += 1
        return self._generator.normal(mean, std, size=tuple(shape))

    def uniform(self, shape: Sequence[int] = (), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        self.draws += 1
        return self._generator.uniform(low, high, size=tuple(shape))

    def integers(self, low: int, high: int, size=None):
        """Draw integers from ``[low, high)``."""
        self.draws += 1
        return self._generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        self.draws += 1
        return self._generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        self.draws += 1
        return self._generator.choice(n, size=size, replace=replace)
