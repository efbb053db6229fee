import abc # Abstract Base Classes
import hashlib
from typing import Optional, Tuple

import numpy as np


class BaseTeacher(abc.ABC):
    """
    Abstract Base Class for every teacher model behind the oracle.
    Concrete teachers implement '_forward'; callers go through 'infer', which
    counts every forward pass independently of any budget ledger.
    """
    def __init__(self):
        # teacher_name should be set by concrete teachers in their __init__
        self.teacher_name: str = "GenericTeacher"
        self.forward_calls: int = 0

    @property
    @abc.abstractmethod
    def num_classes(self) -> int:
        """Length of the logit vectors the teacher returns."""

    @property
    def hint_dim(self) -> int:
        """Width of the intermediate-layer hint; 0 for logits-only teachers."""
        return 0

    @abc.abstractmethod
    def _forward(self, sample_id: int, features: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """
        Runs the teacher on one sample.

        Args:
            sample_id (int): Stable id of the sample.
            features (np.ndarray): Feature vector of the sample (may be ignored
                                   by teachers that key on the id).

        Returns:
            Tuple[np.ndarray, Optional[np.ndarray]]: logits of length
                num_classes, and the hint vector when the teacher has one.
        """

    @abc.abstractmethod
    def weight_bytes(self) -> bytes:
        """Canonical byte encoding of the teacher's weights, for fingerprinting."""

    def infer(self, sample_id: int, features: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        self.forward_calls += 1
        logits, hint = self._forward(sample_id, features)
        return np.asarray(logits, dtype=np.float64), None if hint is None else np.asarray(hint, dtype=np.float64)

    def fingerprint(self) -> str:
        """SHA-256 of the teacher weights, as hex."""
        return hashlib.sha256(self.weight_bytes()).hexdigest()
