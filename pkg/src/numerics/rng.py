"""
Seeded random streams.

Every stream is a numpy `Generator` driven by the Philox-4x64 counter-based
bit generator, keyed through `SeedSequence(entropy=seed, spawn_key=...)`.
Both algorithms are platform independent, so an identical seed and spawn key
replay an identical draw sequence everywhere.
"""

import zlib
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidInput

Tag = Union[int, str]

_MAX_SEED = 2 ** 64


def _tag_to_int(tag: Tag) -> int:
    if isinstance(tag, str):
        return zlib.crc32(tag.encode("utf-8"))
    if tag < 0:
        raise InvalidInput(f"Stream tags must be nonnegative, got {tag}")
    return int(tag)


class RngStream:
    """
    A reproducible random stream. Not shareable between threads; derive one
    stream per worker with `child`.
    """

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        if not 0 <= int(seed) < _MAX_SEED:
            raise InvalidInput(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        seed_seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._generator = np.random.Generator(np.random.Philox(seed_seq))
        self.draws = 0

    def child(self, *tags: Tag) -> "RngStream":
        """Derives an independent stream; the parent stream is not advanced."""
        return RngStream(self.seed, self.spawn_key + tuple(_tag_to_int(t) for t in tags))

    @property
    def state(self) -> Dict[str, Any]:
        """Philox counter/key state, for replay audits."""
        return self._generator.bit_generator.state

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Optional[Any] = None):
        self.draws += 1
        return self._generator.uniform(low, high, size)

    def beta(self, a: float, b: float, size: Optional[Any] = None):
        self.draws += 1
        return self._generator.beta(a, b, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Optional[Any] = None):
        self.draws += 1
        return self._generator.normal(loc, scale, size)

    def integers(self, low: int, high: Optional[int] = None, size: Optional[Any] = None):
        self.draws += 1
        return self._generator.integers(low, high, size)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        self.draws += 1
        return self._generator.choice(n, size=size, replace=replace)

    def permutation(self, n: Union[int, Sequence[Any]]) -> np.ndarray:
        self.draws += 1
        return self._generator.permutation(n)
