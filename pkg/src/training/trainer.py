"""
The training protocol for one (method, n, seed, lr) run.

Validation accuracy is measured before the first step and then once per
evaluation interval (an epoch, or every step in per-step patience mode).
When it has not improved for `patience` evaluations the best checkpoint is
restored, the learning rate is multiplied by `decay_factor` and the momentum
buffers are cleared. Running out of patience after the last decay ends the run.
"""

import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import InvalidInput
from src.losses.base_losses import ce_loss_batch
from src.losses.hint import HintRegressor
from src.numerics.rng import RngStream
from src.standard_formats import EpochRecord, RunResult
from src.training.assemblies import build_assembly, forward_backward
from src.training.checkpoints import save_checkpoint
from src.training.config import TrainConfig
from src.training.mlp import MlpModel
from src.training.optimizer import SGD
from src.training.run_inputs import RunInputs
from src.training.run_log import RunRecorder, config_hash

logger = logging.getLogger(__name__)


def evaluate(model: MlpModel, x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """(mean cross-entropy, top-1 accuracy) on a labelled set."""
    if len(y) == 0:
        raise InvalidInput("Cannot evaluate on an empty set")
    logits = model.logits(x)
    loss = ce_loss_batch(logits, y).value
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    return loss, acc


def run_id_for(cfg: TrainConfig, seed: int, lr: float) -> str:
    tag = f"{cfg.method}-n{cfg.n}-s{seed}-lr{lr:g}"
    if cfg.method in ("CKD", "FitNets+CKD"):
        tag += f"-k{cfg.ckd.k}-{cfg.ckd.comparison.mode}"
    return tag


@dataclass
class PlateauTracker:
    """Counts evaluations without a validation-accuracy improvement."""
    patience: int
    max_decays: int
    best_acc: float = -np.inf
    best_eval: int = -1
    since_best: int = 0
    decays: int = 0
    evaluations: int = 0

    def observe(self, val_acc: float) -> str:
        """Returns 'improved', 'wait', 'decay' or 'stop'."""
        index = self.evaluations
        self.evaluations += 1
        if val_acc > self.best_acc:
            self.best_acc = val_acc
            self.best_eval = index
            self.since_best = 0
            return "improved"
        self.since_best += 1
        if self.since_best < self.patience:
            return "wait"
        if self.decays >= self.max_decays:
            return "stop"
        self.decays += 1
        self.since_best = 0
        return "decay"


@dataclass
class _Snapshot:
    params: Dict[str, np.ndarray] = field(default_factory=dict)
    epoch: int = 0

    def take(self, trainable: Dict[str, np.ndarray], epoch: int) -> None:
        self.params = {k: v.copy() for k, v in trainable.items()}
        self.epoch = epoch

    def restore(self, trainable: Dict[str, np.ndarray]) -> None:
        for name, value in self.params.items():
            np.copyto(trainable[name], value)


def train_model(cfg: TrainConfig, inputs: RunInputs, lr: float, run_log: Optional[RunRecorder] = None,
                checkpoint_path: Optional[str] = None) -> Tuple[MlpModel, RunResult]:
    """
    Trains one network from the seed's initial weights and returns it at its
    best-validation checkpoint together with the run record.

    Args:
        cfg: method and protocol settings.
        inputs: budgeted ids, evaluation partitions and the warmed oracle for the seed.
        lr: initial learning rate.
        run_log: optional run log (or per-run buffer) receiving one record per epoch.
        checkpoint_path: where to write the best-validation checkpoint, if wanted.

    Returns:
        (model, RunResult), both at the best-validation checkpoint.
    """
    started = time.perf_counter()
    seed = inputs.seed
    run_id = run_id_for(cfg, seed, lr)
    cfg_dict = cfg.to_dict()
    cfg_dict["lr"] = lr
    cfg_dict["seed"] = seed
    cfg_hash = config_hash(cfg_dict)
    cfg.log_interpretations()

    widths = list(cfg.student_widths)
    if widths[0] != inputs.x_train.shape[1] or widths[-1] != inputs.num_classes:
        raise InvalidInput(f"Student widths {widths} do not fit {inputs.x_train.shape[1]} features "
                           f"and {inputs.num_classes} classes")
    if inputs.n != cfg.n:
        raise InvalidInput(f"Run inputs hold {inputs.n} budgeted samples, config says n={cfg.n}")

    root = RngStream(seed)
    model = MlpModel.initialize(widths, root.child("student-init"))
    init_hash = model.fingerprint()

    assembly = build_assembly(cfg)
    assembly.prepare(inputs)
    regressor: Optional[HintRegressor] = None
    trainable = model.params
    if assembly.needs_regressor:
        teacher_dim = inputs.oracle.teacher.hint_dim
        regressor = HintRegressor.initialize(model.hint_dim, teacher_dim, root.child("regressor"))
        trainable = dict(model.params)
        trainable.update(regressor.params)

    optimizer = SGD(trainable, lr, cfg.momentum, cfg.weight_decay)
    batch_rng = root.child("batches", cfg.method)
    loss_rng = root.child("loss", cfg.method)
    steps_per_epoch = cfg.resolved_steps_per_epoch
    per_step = cfg.patience_unit == "step"

    tracker = PlateauTracker(cfg.patience, cfg.max_decays)
    best = _Snapshot()
    records: List[EpochRecord] = []
    restored_accs: List[float] = []
    calls_after_warmup = inputs.teacher_calls

    def validate(epoch: int) -> Tuple[str, float, float]:
        val_loss, val_acc = evaluate(model, inputs.x_val, inputs.y_val)
        action = tracker.observe(val_acc)
        if action == "improved":
            best.take(trainable, epoch)
        elif action == "decay":
            best.restore(trainable)
            optimizer.lr *= cfg.decay_factor
            optimizer.reset_velocity()
            _, resumed_acc = evaluate(model, inputs.x_val, inputs.y_val)
            restored_accs.append(resumed_acc)
            logger.info("%s: decay %d at epoch %d, lr -> %g, resumed from epoch %d (val acc %.4f)",
                        run_id, tracker.decays, epoch, optimizer.lr, best.epoch, resumed_acc)
        return action, val_loss, val_acc

    def record(epoch: int, lr_used: float, train_loss: float, val_loss: float, val_acc: float,
               lambdas: Optional[Tuple[float, float]] = None) -> None:
        _, train_acc = evaluate(model, inputs.x_train, inputs.y_train)
        rec: EpochRecord = {
            "epoch": epoch, "step": optimizer.steps, "lr": lr_used, "train_loss": train_loss,
            "train_acc": train_acc, "val_loss": val_loss, "val_acc": val_acc, "decays": tracker.decays,
            "lambda1_mean": lambdas[0] if lambdas else None,
            "lambda2_mean": lambdas[1] if lambdas else None,
        }
        records.append(rec)
        if run_log is not None:
            run_log.epoch(run_id, cfg_hash, rec)

    action, val_loss, val_acc = validate(0)
    record(0, lr, 0.0, val_loss, val_acc)

    epoch = 0
    stopped = False
    while not stopped:
        if epoch >= cfg.max_epochs:
            logger.warning("%s: reached max_epochs=%d before the protocol finished", run_id, cfg.max_epochs)
            break
        epoch += 1
        assembly.start_epoch(epoch)
        lr_used = optimizer.lr
        losses = []
        lambda1: List[np.ndarray] = []
        lambda2: List[np.ndarray] = []
        for _ in range(steps_per_epoch):
            batch = assembly.build_batch(batch_rng)
            out = forward_backward(model, batch, assembly, regressor, loss_rng)
            optimizer.step(out.grad_student)
            losses.append(out.value)
            if "ckd.lambda1" in out.extras:
                lambda1.append(np.asarray(out.extras["ckd.lambda1"]))
                lambda2.append(np.asarray(out.extras["ckd.lambda2"]))
            if per_step:
                action, val_loss, val_acc = validate(epoch)
                if action == "stop":
                    stopped = True
                    break
        if not per_step:
            action, val_loss, val_acc = validate(epoch)
            stopped = action == "stop"
        lambdas = None
        if lambda1:
            lambdas = (float(np.mean(np.concatenate(lambda1))), float(np.mean(np.concatenate(lambda2))))
        record(epoch, lr_used, float(np.mean(losses)), val_loss, val_acc, lambdas)

    best.restore(trainable)
    _, test_acc = evaluate(model, inputs.x_test, inputs.y_test)
    if inputs.teacher_calls != calls_after_warmup:
        logger.warning("%s: teacher was called %d times after warm-up", run_id,
                       inputs.teacher_calls - calls_after_warmup)

    saved_path = None
    if checkpoint_path:
        save_checkpoint(checkpoint_path, model, regressor,
                        metadata={"run_id": run_id, "method": cfg.method, "seed": seed, "lr": lr})
        saved_path = os.path.basename(checkpoint_path)

    result: RunResult = {
        "run_id": run_id,
        "method": cfg.method,
        "n": cfg.n,
        "seed": seed,
        "lr": lr,
        "epochs": records,
        "best_epoch": best.epoch,
        "best_val_acc": float(tracker.best_acc),
        "test_acc": test_acc,
        "teacher_calls": inputs.teacher_calls,
        "decays": tracker.decays,
        "restored_val_accs": restored_accs,
        "total_steps": optimizer.steps,
        "steps_per_epoch": steps_per_epoch,
        "checkpoint_path": saved_path,
        "init_weights_hash": init_hash,
        "split_hash": inputs.split_hash,
        "config": cfg_dict,
    }
    if run_log is not None:
        # batchers draw positions into train_ids; the log records sample ids
        audit = getattr(getattr(assembly, "batcher", None), "audit", [])
        draws = [[[int(inputs.train_ids[p]) for p in g.group_a], [int(inputs.train_ids[p]) for p in g.group_b]]
                 for g in audit]
        run_log.final(run_id, cfg_hash, result, extra={"group_draws": draws})
    logger.info("%s: best val %.4f at epoch %d, test %.4f, %d decays, %d steps in %.1fs",
                run_id, tracker.best_acc, best.epoch, test_acc, tracker.decays, optimizer.steps,
                time.perf_counter() - started)
    return model, result


def train_one(cfg: TrainConfig, inputs: RunInputs, lr: float, run_log: Optional[RunRecorder] = None,
              checkpoint_path: Optional[str] = None) -> RunResult:
    """RunResult of one (method, n, seed, lr) run; see train_model."""
    _, result = train_model(cfg, inputs, lr, run_log=run_log, checkpoint_path=checkpoint_path)
    return result
