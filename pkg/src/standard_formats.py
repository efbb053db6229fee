# fti_distill/src/standard_formats.py

from typing import List, Dict, Any, Optional, TypedDict

#  Helper TypedDicts for nested structures

class EpochRecord(TypedDict):
    """
    Metrics captured at one validation point of a training run.
    Accuracies are fractions in [0, 1]; losses are batch-mean values in nats.
    """
    epoch: int                # 0 is the evaluation before the first optimizer step
    step: int                 # Total optimizer steps taken when the record was written
    lr: float                 # Learning rate in force during the preceding steps
    train_loss: float         # Mean total training loss over the preceding steps (0.0 at epoch 0)
    train_acc: float          # Top-1 accuracy on the budgeted training samples
    val_loss: float           # Cross-entropy on the validation partition (ground truth only)
    val_acc: float            # Top-1 accuracy on the validation partition
    decays: int               # Number of learning-rate decays applied so far
    lambda1_mean: Optional[float]  # Mean comparison weight on group A over the epoch (comparative methods)
    lambda2_mean: Optional[float]  # Mean comparison weight on group B; None before the first step


class RunResult(TypedDict, total=False):
    """
    Seeded, reproducible outcome of one (method, n, seed, lr) training run.
    Every field is a deterministic function of the config.
    """
    run_id: str
    method: str
    n: int
    seed: int
    lr: float
    epochs: List[EpochRecord]
    best_epoch: int
    best_val_acc: float
    test_acc: float                       # Top-1 on the held-out test partition at the best checkpoint
    teacher_calls: int                    # Ledger count of teacher forward passes for this run's budget
    decays: int
    restored_val_accs: List[float]        # Validation accuracy re-measured after each best-checkpoint restore
    total_steps: int
    steps_per_epoch: int
    checkpoint_path: Optional[str]        # File name of the best-val checkpoint, when persisted
    init_weights_hash: str                # SHA-256 of the initial student parameters
    split_hash: str                       # SHA-256 of the budgeted ids and validation ids
    config: Dict[str, Any]                # Fully resolved TrainConfig


class SweepResult(TypedDict):
    """
    Result of a learning-rate sweep over seeds for one method and budget.
    """
    method: str
    n: int
    best_lr: float
    val_mean_by_lr: Dict[str, float]      # lr (as text) -> mean best-val accuracy over seeds
    test_mean: float
    test_std: float                       # Sample standard deviation (0.0 for a single seed)
    runs: List[RunResult]                 # Runs at the selected lr, ordered by seed
    all_runs: List[RunResult]


class RunLogRecord(TypedDict, total=False):
    """
    One line of the JSON-lines run log.
    """
    run_id: str
    config_hash: str
    kind: str                             # "epoch" or "final"
    epoch: Optional[EpochRecord]
    final: Optional[Dict[str, Any]]


class CorrelationReport(TypedDict):
    """
    Student-teacher class-logit correlation comparison on a fixed sample set.
    """
    teacher_corr: List[List[float]]
    student_corr: List[List[float]]
    metric: float                          # Mean absolute entrywise difference, in [0, 2]
    m: int
    sample_ids: List[int]


class FlatnessCurve(TypedDict):
    """
    Sorted singular values of (centered) logit representations.
    """
    values: List[float]                    # Nonincreasing, nonnegative
    per_class: bool
    normalized: bool                       # Divided by the leading singular value
    num_classes: int
    samples_per_class: Dict[int, int]      # Only classes that entered the curve
