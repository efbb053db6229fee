import logging
import os
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from src.errors import DatasetError, InvalidInput
from src.teacher_oracle.base_teacher import BaseTeacher

logger = logging.getLogger(__name__)


class LookupTableTeacher(BaseTeacher):
    """
    Teacher backed by a precomputed table keyed by sample id. The CSV layout is
    one row per sample: 'sample_id', then 'logit_0'..'logit_{C-1}' and
    optionally 'hint_0'..'hint_{D-1}'.
    """
    def __init__(self, logits: Dict[int, np.ndarray], hints: Optional[Dict[int, np.ndarray]] = None):
        super().__init__()
        self.teacher_name = "LookupTable"
        if not logits:
            raise InvalidInput("Lookup-table teacher needs at least one entry")
        widths = {v.shape for v in logits.values()}
        if len(widths) != 1:
            raise InvalidInput(f"Lookup-table logits have inconsistent shapes: {sorted(widths)}")
        self._logits = {int(k): np.asarray(v, dtype=np.float64) for k, v in logits.items()}
        self._hints = {int(k): np.asarray(v, dtype=np.float64) for k, v in (hints or {}).items()}
        if self._hints and set(self._hints) != set(self._logits):
            raise InvalidInput("Hints must be given for exactly the ids that have logits")
        self._num_classes = next(iter(widths))[0]
        self._hint_dim = next(iter(self._hints.values())).shape[0] if self._hints else 0

    @classmethod
    def from_csv(cls, filepath: str) -> "LookupTableTeacher":
        """Loads the table with pandas; values are read back at full float64 precision."""
        if not os.path.exists(filepath):
            raise DatasetError(f"Teacher table not found at '{filepath}'")
        try:
            df = pd.read_csv(filepath, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DatasetError(f"Error reading teacher table '{filepath}': {e}")
        if "sample_id" not in df.columns:
            raise DatasetError(f"Teacher table '{filepath}' has no 'sample_id' column")
        logit_cols = [c for c in df.columns if c.startswith("logit_")]
        hint_cols = [c for c in df.columns if c.startswith("hint_")]
        if not logit_cols:
            raise DatasetError(f"Teacher table '{filepath}' has no logit columns")
        logit_cols.sort(key=lambda c: int(c.split("_", 1)[1]))
        hint_cols.sort(key=lambda c: int(c.split("_", 1)[1]))

        ids = df["sample_id"].astype(np.int64).to_numpy()
        logit_values = df[logit_cols].to_numpy(dtype=np.float64)
        logits = {int(i): row for i, row in zip(ids, logit_values)}
        hints = None
        if hint_cols:
            hint_values = df[hint_cols].to_numpy(dtype=np.float64)
            hints = {int(i): row for i, row in zip(ids, hint_values)}
        logger.info("Loaded lookup-table teacher with %d entries from %s", len(logits), filepath)
        return cls(logits, hints)

    def to_csv(self, filepath: str) -> None:
        ids = sorted(self._logits)
        frame = pd.DataFrame(np.stack([self._logits[i] for i in ids]),
                             columns=[f"logit_{c}" for c in range(self._num_classes)])
        if self._hints:
            hint_frame = pd.DataFrame(np.stack([self._hints[i] for i in ids]),
                                      columns=[f"hint_{d}" for d in range(self._hint_dim)])
            frame = pd.concat([frame, hint_frame], axis=1)
        frame.insert(0, "sample_id", ids)
        frame.to_csv(filepath, index=False, float_format="%.17g")

    @property
    def num_classes(self) -> int:
        return self._num_classes

    @property
    def hint_dim(self) -> int:
        return self._hint_dim

    def _forward(self, sample_id: int, features: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        if int(sample_id) not in self._logits:
            raise InvalidInput(f"Sample {sample_id} is not in the lookup table")
        return self._logits[int(sample_id)], self._hints.get(int(sample_id))

    def weight_bytes(self) -> bytes:
        chunks = []
        for i in sorted(self._logits):
            chunks.append(np.int64(i).tobytes())
            chunks.append(np.ascontiguousarray(self._logits[i], dtype="<f8").tobytes())
            if self._hints:
                chunks.append(np.ascontiguousarray(self._hints[i], dtype="<f8").tobytes())
        return b"".join(chunks)
