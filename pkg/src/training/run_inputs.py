"""
Per-seed inputs shared by every method and learning rate: the budgeted
training ids, the evaluation partitions and the warmed teacher oracle.
"""

import hashlib
import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.data.dataset_manager import Dataset
from src.errors import InvalidInput
from src.numerics.rng import RngStream
from src.teacher_oracle.base_teacher import BaseTeacher
from src.teacher_oracle.oracle import TeacherOracle
from src.teacher_oracle.teacher_cache import TeacherCache

logger = logging.getLogger(__name__)


@dataclass
class RunInputs:
    seed: int
    train_ids: np.ndarray      # the n budgeted ids, in selection order
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    num_classes: int
    oracle: Optional[TeacherOracle]    # None for runs that never consult a teacher
    split_hash: str

    @property
    def n(self) -> int:
        return len(self.train_ids)

    @property
    def teacher_calls(self) -> int:
        return self.oracle.teacher_calls if self.oracle is not None else 0

    def features_for(self, positions: np.ndarray) -> np.ndarray:
        return self.x_train[positions]


def select_budget_ids(dataset: Dataset, n: int, seed: int) -> np.ndarray:
    """n training ids chosen by seed; identical for every method under the same seed."""
    pool = dataset.ids("train")
    if n > len(pool):
        raise InvalidInput(f"Budget n={n} exceeds the {len(pool)} available training samples")
    picks = RngStream(seed).child("budget", n).choice(len(pool), n, replace=False)
    return pool[np.sort(picks)]


def _split_hash(train_ids: np.ndarray, val_ids: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(train_ids, dtype="<i8").tobytes())
    digest.update(b"|")
    digest.update(np.ascontiguousarray(val_ids, dtype="<i8").tobytes())
    return digest.hexdigest()


def prepare_run_inputs(dataset: Dataset, teacher: BaseTeacher, n: int, seed: int,
                       white_box: bool = False, cache_path: Optional[str] = None,
                       allow_mismatch: bool = False) -> RunInputs:
    """
    Selects the budgeted ids, builds (or reloads) the teacher cache and warms
    it with one query per selected sample. Validation and test samples never
    reach the teacher.
    """
    train_ids = select_budget_ids(dataset, n, seed)
    cache = None
    if cache_path and os.path.exists(cache_path):
        cache = TeacherCache.load(cache_path, num_classes=teacher.num_classes,
                                  fingerprint=teacher.fingerprint(), allow_mismatch=allow_mismatch)
        stray = set(cache.ids()) - set(int(i) for i in train_ids)
        if stray:
            raise InvalidInput(f"Cache '{cache_path}' holds {len(stray)} ids outside this run's budgeted sample")
        logger.info("Reusing %d cached teacher entries from %s", len(cache), cache_path)

    oracle = TeacherOracle(teacher, budget=n, white_box=white_box, cache=cache, allow_mismatch=allow_mismatch)
    x_train, y_train = dataset.take(train_ids)
    oracle.warm(train_ids, x_train)
    if cache_path:
        oracle.cache.persist(cache_path)

    x_val, y_val = dataset.split_arrays("val")
    x_test, y_test = dataset.split_arrays("test")
    return RunInputs(
        seed=seed,
        train_ids=train_ids,
        x_train=x_train,
        y_train=y_train,
        x_val=x_val,
        y_val=y_val,
        x_test=x_test,
        y_test=y_test,
        num_classes=dataset.num_classes,
        oracle=oracle,
        split_hash=_split_hash(train_ids, dataset.ids("val")),
    )


def full_split_inputs(dataset: Dataset, seed: int) -> RunInputs:
    """Inputs over the whole training split with no oracle, for supervised-only training."""
    train_ids = dataset.ids("train")
    x_train, y_train = dataset.take(train_ids)
    x_val, y_val = dataset.split_arrays("val")
    x_test, y_test = dataset.split_arrays("test")
    return RunInputs(
        seed=seed,
        train_ids=train_ids,
        x_train=x_train,
        y_train=y_train,
        x_val=x_val,
        y_val=y_val,
        x_test=x_test,
        y_test=y_test,
        num_classes=dataset.num_classes,
        oracle=None,
        split_hash=_split_hash(train_ids, dataset.ids("val")),
    )
