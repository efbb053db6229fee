"""Supervised training of the teacher network on the full training split."""

import logging
import math
from typing import Optional, Sequence, Tuple

from src.data.dataset_manager import Dataset
from src.errors import InvalidInput
from src.standard_formats import RunResult
from src.training.config import TrainConfig
from src.training.mlp import MlpModel
from src.training.run_inputs import full_split_inputs
from src.training.run_log import RunRecorder
from src.training.trainer import train_model

logger = logging.getLogger(__name__)

TEACHER_PATIENCE = 10
TEACHER_MAX_EPOCHS = 300


def teacher_config(dataset: Dataset, widths: Sequence[int], seed: int = 0, lr: float = 0.1,
                   batch_size: int = 64, patience: int = TEACHER_PATIENCE,
                   max_epochs: int = TEACHER_MAX_EPOCHS) -> TrainConfig:
    """
    CE-only configuration over every training sample. An epoch is one pass
    over the training split, so patience is far shorter than for budgeted runs.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or widths[0] != dataset.dim or widths[-1] != dataset.num_classes:
        raise InvalidInput(f"Teacher widths {list(widths)} must start at {dataset.dim} and end at "
                           f"{dataset.num_classes}")
    n_train = len(dataset.ids("train"))
    return TrainConfig(
        method="CE-only",
        n=n_train,
        batch_size=batch_size,
        lr_grid=(lr,),
        seeds=(seed,),
        patience=patience,
        steps_per_epoch=math.ceil(n_train / batch_size),
        max_epochs=max_epochs,
        student_widths=widths,
    )


def train_teacher(dataset: Dataset, widths: Sequence[int], seed: int = 0, lr: float = 0.1,
                  batch_size: int = 64, patience: int = TEACHER_PATIENCE,
                  max_epochs: int = TEACHER_MAX_EPOCHS,
                  run_log: Optional[RunRecorder] = None) -> Tuple[MlpModel, RunResult]:
    """
    Trains a teacher MLP with cross-entropy under the same decay-and-restore
    protocol as the students.

    Args:
        dataset: labelled data; the whole train split is used, no budget applies.
        widths: layer widths, input dimension first and class count last.
        seed: initialization and batching seed.

    Returns:
        (teacher model at its best-validation checkpoint, its RunResult). The
        RunResult's test_acc is the accuracy ceiling reported next to students.
    """
    cfg = teacher_config(dataset, widths, seed, lr, batch_size, patience, max_epochs)
    inputs = full_split_inputs(dataset, seed)
    model, result = train_model(cfg, inputs, lr, run_log=run_log)
    logger.info("Teacher %s trained: val %.4f, test %.4f after %d epochs",
                list(cfg.student_widths), result["best_val_acc"], result["test_acc"], len(result["epochs"]) - 1)
    return model, result
