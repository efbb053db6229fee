"""
Comparison-group sampling over the budgeted sample ids.

A group is a k-subset split into A (ceil(k/2) ids) and B (floor(k/2) ids).
For odd k the two sides have different sizes, so every split is distinct; for
even k the split {A, B} is counted once regardless of orientation.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Hashable, Iterator, List, Optional, Sequence, Tuple

from src.errors import InvalidInput, TooLarge
from src.numerics.rng import RngStream

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10 ** 6
AUDIT_DRAWS = 100


@dataclass(frozen=True)
class ComparisonGroup:
    group_a: Tuple[int, ...]
    group_b: Tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.group_a) + len(self.group_b)

    def canonical(self) -> Hashable:
        """Identity of the (subset, split) pair, independent of member order and orientation."""
        a = tuple(sorted(self.group_a))
        b = tuple(sorted(self.group_b))
        if len(a) == len(b) and b < a:
            a, b = b, a
        return a, b

    def swapped(self) -> "ComparisonGroup":
        return ComparisonGroup(self.group_b, self.group_a)


@dataclass(frozen=True)
class SamplerConfig:
    k: int = 3
    cap: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise InvalidInput(f"k must be at least 2, got {self.k}")
        if self.cap < 1:
            raise InvalidInput(f"cap must be at least 1, got {self.cap}")


def count_groups(n: int, k: int) -> int:
    """Number of distinct (k-subset, split) pairs from n ids."""
    if k < 2 or n < k:
        return 0
    splits = math.comb(k, (k + 1) // 2)
    if k % 2 == 0:
        splits //= 2
    return math.comb(n, k) * splits


def _check_ids(ids: Sequence[int], k: int) -> List[int]:
    ids = [int(i) for i in ids]
    if len(set(ids)) != len(ids):
        raise InvalidInput("Sample ids must be distinct")
    if len(ids) < k:
        raise InvalidInput(f"Need at least k={k} ids, got {len(ids)}")
    return ids


def enumerate_groups(ids: Sequence[int], k: int, oriented: bool = False) -> List[ComparisonGroup]:
    """
    Every distinct (subset, split) exactly once, in lexicographic order of
    positions in `ids`. With `oriented=True`, even-k splits are emitted in
    both orientations.

    Raises:
        TooLarge: the total exceeds ENUMERATION_LIMIT.
    """
    if k < 2:
        raise InvalidInput(f"k must be at least 2, got {k}")
    ids = _check_ids(ids, k)
    total = count_groups(len(ids), k) * (2 if oriented and k % 2 == 0 else 1)
    if total > ENUMERATION_LIMIT:
        raise TooLarge(f"{total} groups exceed the enumeration limit of {ENUMERATION_LIMIT}")

    size_a = (k + 1) // 2
    groups: List[ComparisonGroup] = []
    for subset in itertools.combinations(range(len(ids)), k):
        for side_a in itertools.combinations(subset, size_a):
            side_b = tuple(p for p in subset if p not in side_a)
            if k % 2 == 0 and subset[0] not in side_a and not oriented:
                continue
            groups.append(ComparisonGroup(tuple(ids[p] for p in side_a), tuple(ids[p] for p in side_b)))
    return groups


def sample_groups(ids: Sequence[int], cfg: SamplerConfig,
                  rng: Optional[RngStream] = None) -> Iterator[ComparisonGroup]:
    """
    Streams min(cap, count_groups) distinct groups, uniformly at random and
    without replacement across the stream. Even-k groups get a random
    orientation.
    """
    ids = _check_ids(ids, cfg.k)
    rng = rng if rng is not None else RngStream(cfg.seed)
    n = len(ids)
    total = count_groups(n, cfg.k)
    length = min(cfg.cap, total)
    size_a = (cfg.k + 1) // 2

    if total <= ENUMERATION_LIMIT and 2 * length > total:
        # dense regime: shuffle the full enumeration instead of rejecting
        groups = enumerate_groups(ids, cfg.k)
        order = rng.permutation(len(groups))[:length]
        flips = rng.integers(0, 2, size=length) if cfg.k % 2 == 0 else None
        for position, index in enumerate(order):
            group = groups[int(index)]
            yield group.swapped() if flips is not None and flips[position] else group
        return

    seen = set()
    while len(seen) < length:
        picks = rng.choice(n, cfg.k, replace=False)
        group = ComparisonGroup(tuple(ids[int(p)] for p in picks[:size_a]),
                                tuple(ids[int(p)] for p in picks[size_a:]))
        key = group.canonical()
        if key in seen:
            continue
        seen.add(key)
        yield group


class GroupBatcher:
    """
    Serves per-step batches of groups. Each epoch opens a fresh stream seeded
    from (run seed, epoch), or from (run seed, 0) in fixed mode so every epoch
    replays the same groups. A stream that runs out mid-epoch restarts under a
    pass-derived seed. The first AUDIT_DRAWS groups of the run are kept.
    """

    def __init__(self, ids: Sequence[int], cfg: SamplerConfig, resample_each_epoch: bool = True):
        self.ids = _check_ids(ids, cfg.k)
        self.cfg = cfg
        self.resample_each_epoch = resample_each_epoch
        self.audit: List[ComparisonGroup] = []
        self._root = RngStream(cfg.seed).child("groups")
        self._epoch = 0
        self._pass = 0
        self._stream: Optional[Iterator[ComparisonGroup]] = None
        logger.info("Group draws %s each epoch (k=%d, cap=%d)",
                    "resampled" if resample_each_epoch else "fixed", cfg.k, cfg.cap)

    def start_epoch(self, epoch: int) -> None:
        self._epoch = epoch if self.resample_each_epoch else 0
        self._pass = 0
        self._open()

    def _open(self) -> None:
        rng = self._root.child(self._epoch, self._pass)
        self._stream = sample_groups(self.ids, self.cfg, rng)

    def next_batch(self, size: int) -> List[ComparisonGroup]:
        if self._stream is None:
            self.start_epoch(0)
        batch: List[ComparisonGroup] = []
        while len(batch) < size:
            group = next(self._stream, None)
            if group is None:
                self._pass += 1
                self._open()
                continue
            batch.append(group)
            if len(self.audit) < AUDIT_DRAWS:
                self.audit.append(group)
        return batch
