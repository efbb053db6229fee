from typing import Optional, Tuple

import numpy as np

from src.errors import InvalidInput
from src.teacher_oracle.base_teacher import BaseTeacher
from src.training.mlp import MlpModel


class MlpTeacher(BaseTeacher):
    """
    A trained MlpModel behind the teacher interface. The hint is the last
    hidden activation.
    """
    def __init__(self, model: MlpModel):
        super().__init__()
        self.teacher_name = "MLP"
        self.model = model

    @property
    def num_classes(self) -> int:
        return self.model.num_classes

    @property
    def hint_dim(self) -> int:
        return self.model.hint_dim

    def _forward(self, sample_id: int, features: Optional[np.ndarray]) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        if features is None:
            raise InvalidInput(f"MLP teacher needs the features of sample {sample_id}")
        cache = self.model.forward(np.asarray(features, dtype=np.float64)[None, :])
        hint = None if cache.hint is None else cache.hint[0]
        return cache.logits[0], hint

    def weight_bytes(self) -> bytes:
        chunks = [str(self.model.widths).encode("utf-8")]
        for name in sorted(self.model.params):
            chunks.append(name.encode("utf-8"))
            chunks.append(np.ascontiguousarray(self.model.params[name], dtype="<f8").tobytes())
        return b"".join(chunks)
