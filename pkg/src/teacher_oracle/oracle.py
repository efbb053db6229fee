"""
Budget-gated access to the teacher.

Every teacher forward pass goes through `TeacherOracle.query`: a cached sample
is served for free, a new sample spends one unit of the budget, and a miss
after the budget is spent is a hard error.
"""

import logging
import threading
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import BudgetExhausted, CacheCorrupt, HintUnavailable, InvalidInput
from src.teacher_oracle.base_teacher import BaseTeacher
from src.teacher_oracle.teacher_cache import TeacherCache

logger = logging.getLogger(__name__)


@dataclass
class BudgetLedger:
    """Accounting of teacher calls: `used` never exceeds `limit`."""
    limit: int
    used: int = 0
    preloaded: int = 0                                           # Entries inherited from a persisted cache
    call_log: List[Tuple[int, int]] = field(default_factory=list)   # (sample id, call ordinal)

    def __post_init__(self):
        if self.limit < 1:
            raise InvalidInput(f"Teacher budget must be at least 1, got {self.limit}")

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    def charge(self, sample_id: int) -> None:
        if self.used >= self.limit:
            raise BudgetExhausted(
                f"Teacher budget of {self.limit} calls is spent; sample {sample_id} is not cached")
        self.used += 1
        self.call_log.append((int(sample_id), self.used))


class TeacherOracle:
    """
    The only path from training code to the teacher. White-box mode (hints
    returned along with logits) is fixed when the oracle is created.
    """

    def __init__(self, teacher: BaseTeacher, budget: int, white_box: bool = False,
                 cache: Optional[TeacherCache] = None, allow_mismatch: bool = False):
        self.teacher = teacher
        self.white_box = white_box
        self.ledger = BudgetLedger(limit=budget)
        self._lock = threading.Lock()
        if white_box and teacher.hint_dim == 0:
            raise InvalidInput(f"Teacher '{teacher.teacher_name}' exposes no hint layer for white-box mode")

        if cache is None:
            cache = TeacherCache(teacher.num_classes, teacher.hint_dim if white_box else 0,
                                 teacher.fingerprint())
        else:
            if cache.num_classes != teacher.num_classes:
                raise CacheCorrupt(f"Cache has C={cache.num_classes}, teacher has C={teacher.num_classes}")
            if cache.fingerprint and cache.fingerprint != teacher.fingerprint() and not allow_mismatch:
                raise CacheCorrupt(f"Cache was produced by teacher {cache.fingerprint[:12]}, "
                                   f"this oracle wraps {teacher.fingerprint()[:12]}")
            if white_box and cache.hint_dim != teacher.hint_dim:
                raise HintUnavailable("White-box mode needs a cache that stores hints")
            if len(cache) > budget:
                raise BudgetExhausted(f"Cache holds {len(cache)} entries, more than the budget of {budget}")
            self.ledger.used = len(cache)
            self.ledger.preloaded = len(cache)
        self.cache = cache

    @property
    def teacher_calls(self) -> int:
        return self.ledger.used

    def query(self, sample_id: int, features: Optional[np.ndarray],
              want_hint: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Returns (logits, hint). The hint is None unless `want_hint` is set.

        Raises:
            HintUnavailable: a hint was asked of a logits-only oracle.
            BudgetExhausted: cache miss with the budget spent.
            CacheCorrupt: the teacher returned a vector of the wrong size.
        """
        if want_hint and not self.white_box:
            raise HintUnavailable("Hints were requested from an oracle created without white-box access")
        with self._lock:
            entry = self.cache.get(sample_id)
            if entry is None:
                self.ledger.charge(sample_id)
                logits, hint = self.teacher.infer(sample_id, features)
                self.cache.put(sample_id, logits, hint if self.white_box else None)
                entry = self.cache.get(sample_id)
                logger.debug("Teacher call %d/%d for sample %s", self.ledger.used, self.ledger.limit, sample_id)
        logits, hint = entry
        return logits, (hint if want_hint else None)

    def query_batch(self, ids: Sequence[int], features: Optional[np.ndarray],
                    want_hint: bool = False) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Stacked logits (B, C) and, when requested, hints (B, D)."""
        logits = []
        hints = []
        for row, sample_id in enumerate(ids):
            row_features = None if features is None else features[row]
            z, h = self.query(sample_id, row_features, want_hint)
            logits.append(z)
            hints.append(h)
        return np.stack(logits), (np.stack(hints) if want_hint else None)

    def warm(self, ids: Sequence[int], features: np.ndarray) -> int:
        """Queries every id once; returns the number of new teacher calls."""
        before = self.ledger.used
        self.query_batch(ids, features, want_hint=False)
        spent = self.ledger.used - before
        logger.info("Warmed teacher cache: %d new calls, %d/%d used", spent, self.ledger.used, self.ledger.limit)
        return spent
