"""Counter-based random streams.

Every stochastic routine in the package draws from a ``RandomStream``, a thin
wrapper around numpy's Philox bit generator keyed by ``(master_seed,
stream_id)``.  Two streams built from the same pair replay the same sequence;
distinct stream ids give statistically independent streams regardless of how
work is split across workers.  That property is what makes every experiment
reproducible from a single 64-bit seed and independent of the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

_MASK64 = (1 << 64) - 1
# SplitMix64 increment; used to derive child stream ids deterministically.
_GOLDEN = 0x9E3779B97F4A7C15

DEFAULT_SEED = 271828


@dataclass(frozen=True)
class RandomStream:
    """A replayable random stream identified by ``(master_seed, stream_id)``."""

    master_seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if not 0 <= int(self.master_seed) <= _MASK64:
            raise ParameterError("master_seed must fit in an unsigned 64-bit int")
        if not 0 <= int(self.stream_id) <= _MASK64:
            raise ParameterError("stream_id must fit in an unsigned 64-bit int")

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy Generator (created lazily, then cached)."""
        if self._gen is None:
            key = np.array([self.master_seed, self.stream_id], dtype=np.uint64)
            object.__setattr__(
                self, "_gen", np.random.Generator(np.random.Philox(key=key))
            )
        return self._gen

    def substream(self, index: int) -> "RandomStream":
        """Derive the ``index``-th child stream.

        Children of distinct parents never collide in practice: the id is
        mixed SplitMix64-style, so the (parent, index) -> id map behaves like
        a hash. Same parent and index always give the same child.
        """
        if index < 0:
            raise ParameterError("substream index must be non-negative")
        child = (self.stream_id * _GOLDEN + index + 1) & _MASK64
        return RandomStream(self.master_seed, child)

    def positions(self, n: int, size=None):
        """Uniform 1-based position(s) on {1..n}."""
        return self.generator.integers(1, n + 1, size=size)
