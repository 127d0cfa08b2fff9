"""Reproducible, counter-based random streams.

Every sequence in a generated dataset gets its own stream, derived from a
root seed plus a tuple of integer stream ids. Streams never share state, so
datasets can be generated in any order (or in parallel) with identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngHandle:
    seed: int
    stream: Union[int, Tuple[int, ...]] = 0

    def __post_init__(self):
        if isinstance(self.stream, (int, np.integer)):
            stream = (int(self.stream) & _MASK64,)
        else:
            stream = tuple(int(s) & _MASK64 for s in self.stream)
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream", stream)

    def spawn(self, *ids: int) -> "RngHandle":
        """Handle for a sub-stream, e.g. ``handle.spawn(role, index)``."""
        return RngHandle(self.seed, self.stream + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngHandle, a Generator, or an integer seed."""
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngHandle(int(rng)).generator()
