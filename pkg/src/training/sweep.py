import logging
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.errors import InvalidInput
from src.standard_formats import RunResult, SweepResult
from src.training.config import TrainConfig
from src.training.run_inputs import RunInputs
from src.training.run_log import RunLog, RunLogBuffer
from src.training.trainer import run_id_for, train_one

logger = logging.getLogger(__name__)


def group_runs_by_lr(runs: List[RunResult]) -> Dict[float, List[RunResult]]:
    """
    Groups run results by learning rate, each group ordered by seed.

    Returns a dictionary:
    {
        0.1:  [RunResult(seed=1), RunResult(seed=2), ...],
        0.05: [...],
    }
    """
    grouped: Dict[float, List[RunResult]] = defaultdict(list)
    for run in runs:
        grouped[run["lr"]].append(run)
    for lr in grouped:
        grouped[lr].sort(key=lambda r: r["seed"])
    return grouped


def select_learning_rate(grouped: Mapping[float, List[RunResult]]) -> Tuple[float, Dict[float, float]]:
    """
    Picks the lr with the highest mean best-validation accuracy over seeds.
    Ties go to the larger learning rate.
    """
    if not grouped:
        raise InvalidInput("No runs to select a learning rate from")
    means = {lr: float(np.mean([r["best_val_acc"] for r in runs])) for lr, runs in grouped.items()}
    best_lr = max(means, key=lambda lr: (means[lr], lr))
    return best_lr, means


def sample_std(values: List[float]) -> float:
    """Sample standard deviation (divisor n - 1); 0.0 for a single value."""
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1))


def train_sweep(cfg: TrainConfig, inputs_by_seed: Mapping[int, RunInputs], jobs: int = 1,
                run_log: Optional[RunLog] = None, checkpoint_dir: Optional[str] = None) -> SweepResult:
    """
    Runs every (lr, seed) pair of the config and reports the test accuracy at
    the selected learning rate.

    Args:
        cfg: training configuration; cfg.lr_grid and cfg.seeds define the sweep.
        inputs_by_seed: prepared per-seed inputs (budgeted ids and warmed oracle).
        jobs: maximum number of runs executed concurrently.
        run_log: shared run log; each run is buffered and committed in (lr, seed) order.
        checkpoint_dir: when set, each run's best checkpoint is written there.
    """
    missing = [s for s in cfg.seeds if s not in inputs_by_seed]
    if missing:
        raise InvalidInput(f"No prepared inputs for seeds {missing}")

    tasks = [(lr, seed) for lr in cfg.lr_grid for seed in cfg.seeds]

    def run(task: Tuple[float, int]) -> Tuple[RunResult, Optional[RunLogBuffer]]:
        lr, seed = task
        path = None
        if checkpoint_dir:
            path = os.path.join(checkpoint_dir, run_id_for(cfg, seed, lr) + ".ckpt")
        buffer = run_log.buffer() if run_log is not None else None
        return train_one(cfg, inputs_by_seed[seed], lr, run_log=buffer, checkpoint_path=path), buffer

    runs: List[RunResult] = []
    if jobs > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, tasks))
    else:
        outcomes = map(run, tasks)
    for result, buffer in outcomes:
        if buffer is not None:
            run_log.commit(buffer)
        runs.append(result)

    grouped = group_runs_by_lr(runs)
    best_lr, means = select_learning_rate(grouped)
    chosen = grouped[best_lr]
    tests = [r["test_acc"] for r in chosen]
    logger.info("%s n=%d: selected lr=%g (mean val %.4f); test %.4f +/- %.4f",
                cfg.method, cfg.n, best_lr, means[best_lr], float(np.mean(tests)), sample_std(tests))
    return {
        "method": cfg.method,
        "n": cfg.n,
        "best_lr": best_lr,
        "val_mean_by_lr": {f"{lr:g}": v for lr, v in sorted(means.items(), reverse=True)},
        "test_mean": float(np.mean(tests)),
        "test_std": sample_std(tests),
        "runs": chosen,
        "all_runs": runs,
    }
