"""
Single-sample objectives (cross-entropy, KD) and the shared LossOutput contract.

Every loss returns its value together with the analytic gradient with respect
to the student-side inputs. Teacher-side arrays are constants: no gradient is
ever produced for them.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.numerics.core_math import KL_EPSILON, log_softmax, as_finite_array

KL_DIRECTIONS = ("student_first", "teacher_first")
_LOG_EPSILON = float(np.log(KL_EPSILON))


@dataclass
class LossOutput:
    """
    A scalar loss and its gradients, keyed by the name of each student input
    (e.g. "z_hat", "logits", "Zh_A", "reg_W").
    """
    value: float
    grad_student: Dict[str, np.ndarray]
    extras: Dict[str, Any] = field(default_factory=dict)

    def scaled(self, weight: float) -> "LossOutput":
        return LossOutput(
            value=weight * self.value,
            grad_student={name: weight * g for name, g in self.grad_student.items()},
            extras=dict(self.extras),
        )


@dataclass(frozen=True)
class KdConfig:
    temperature: float = 4.0
    scale_by_T2: bool = True

    def __post_init__(self):
        if not self.temperature > 0:
            raise InvalidInput(f"Temperature must be positive, got {self.temperature}")


def softmax_kl_with_grad(student_logits: np.ndarray, teacher_logits: np.ndarray,
                         direction: str = "student_first",
                         temperature: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise KL between softmax(student / T) and softmax(teacher / T).

    student_first computes KL(p_student || p_teacher) with the teacher
    probabilities clamped below by 1e-12; teacher_first computes
    KL(p_teacher || p_student). Returns (values over leading axes, gradient
    with respect to the student logits).
    """
    if direction not in KL_DIRECTIONS:
        raise InvalidInput(f"Unknown KL direction '{direction}'")
    u = student_logits / temperature
    v = teacher_logits / temperature
    log_s = log_softmax(u)
    log_t = log_softmax(v)
    s = np.exp(log_s)
    if direction == "student_first":
        h = log_s - np.maximum(log_t, _LOG_EPSILON)
        values = np.sum(s * h, axis=-1)
        grad = s * (h - values[..., None])
    else:
        t = np.exp(log_t)
        values = np.sum(np.where(t > 0, t * (log_t - log_s), 0.0), axis=-1)
        grad = s - t
    return values, grad / temperature


def target_kl_with_grad(student_logits: np.ndarray, target_probs: np.ndarray,
                        temperature: float) -> Tuple[np.ndarray, np.ndarray]:
    """KL(target || softmax(student / T)) row-wise, gradient w.r.t. the student logits."""
    log_s = log_softmax(student_logits / temperature)
    s = np.exp(log_s)
    positive = target_probs > 0
    safe_target = np.where(positive, target_probs, 1.0)
    values = np.sum(np.where(positive, target_probs * (np.log(safe_target) - log_s), 0.0), axis=-1)
    row_mass = np.sum(target_probs, axis=-1, keepdims=True)
    return values, (s * row_mass - target_probs) / temperature


def _check_labels(y: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidInput("Class labels must be integers")
        y = y.astype(np.int64)
    if np.any(y < 0) or np.any(y >= num_classes):
        raise InvalidInput(f"Class label out of range [0, {num_classes})")
    return y


def ce_loss_batch(logits: np.ndarray, y: Sequence[int]) -> LossOutput:
    """Mean cross-entropy of a (B, C) logit batch against integer labels."""
    logits = as_finite_array(logits, "logits")
    if logits.ndim != 2:
        raise InvalidInput("Batch cross-entropy expects a (B, C) array")
    batch, num_classes = logits.shape
    y = _check_labels(y, num_classes)
    if y.shape != (batch,):
        raise InvalidInput(f"Expected {batch} labels, got shape {y.shape}")
    log_s = log_softmax(logits)
    rows = np.arange(batch)
    value = -float(np.mean(log_s[rows, y]))
    grad = np.exp(log_s)
    grad[rows, y] -= 1.0
    return LossOutput(value=value, grad_student={"logits": grad / batch})


def ce_loss(z_hat: Sequence[float], y: int) -> LossOutput:
    """Cross-entropy of one logit vector against a class index."""
    z_hat = as_finite_array(z_hat, "z_hat")
    out = ce_loss_batch(z_hat[None, :], np.array([y]))
    return LossOutput(value=out.value, grad_student={"z_hat": out.grad_student["logits"][0]})


def soft_ce_loss_batch(logits: np.ndarray, soft_targets: np.ndarray) -> LossOutput:
    """Mean cross-entropy against soft label distributions (rows of `soft_targets`)."""
    logits = as_finite_array(logits, "logits")
    soft_targets = np.asarray(soft_targets, dtype=np.float64)
    if logits.shape != soft_targets.shape:
        raise InvalidInput(f"Dimension mismatch: {logits.shape} vs {soft_targets.shape}")
    batch = logits.shape[0]
    log_s = log_softmax(logits)
    value = -float(np.mean(np.sum(soft_targets * log_s, axis=-1)))
    grad = np.exp(log_s) * np.sum(soft_targets, axis=-1, keepdims=True) - soft_targets
    return LossOutput(value=value, grad_student={"logits": grad / batch})


def kd_loss_batch(student_logits: np.ndarray, teacher_logits: np.ndarray,
                  cfg: KdConfig = KdConfig()) -> LossOutput:
    """Hinton KD: T^2 * KL(softmax(z / T) || softmax(z_hat / T)), batch mean."""
    student_logits = as_finite_array(student_logits, "student logits")
    teacher_logits = as_finite_array(teacher_logits, "teacher logits")
    if student_logits.shape != teacher_logits.shape:
        raise InvalidInput(f"Dimension mismatch: {student_logits.shape} vs {teacher_logits.shape}")
    values, grad = softmax_kl_with_grad(student_logits, teacher_logits,
                                        direction="teacher_first", temperature=cfg.temperature)
    scale = cfg.temperature ** 2 if cfg.scale_by_T2 else 1.0
    batch = student_logits.shape[0]
    return LossOutput(value=scale * float(np.mean(values)),
                      grad_student={"logits": scale * grad / batch})


def kd_loss(z_hat: Sequence[float], z: Sequence[float], cfg: KdConfig = KdConfig()) -> LossOutput:
    z_hat = as_finite_array(z_hat, "z_hat")
    z = as_finite_array(z, "z")
    if z_hat.shape != z.shape:
        raise InvalidInput(f"Dimension mismatch: {z_hat.shape} vs {z.shape}")
    out = kd_loss_batch(z_hat[None, :], z[None, :], cfg)
    return LossOutput(value=out.value, grad_student={"z_hat": out.grad_student["logits"][0]})


def kd_target_loss_batch(student_logits: np.ndarray, target_probs: np.ndarray,
                         cfg: KdConfig = KdConfig()) -> LossOutput:
    """KD against precomputed (e.g. recombined) teacher probabilities."""
    student_logits = as_finite_array(student_logits, "student logits")
    target_probs = np.asarray(target_probs, dtype=np.float64)
    if student_logits.shape != target_probs.shape:
        raise InvalidInput(f"Dimension mismatch: {student_logits.shape} vs {target_probs.shape}")
    values, grad = target_kl_with_grad(student_logits, target_probs, cfg.temperature)
    scale = cfg.temperature ** 2 if cfg.scale_by_T2 else 1.0
    batch = student_logits.shape[0]
    return LossOutput(value=scale * float(np.mean(values)),
                      grad_student={"logits": scale * grad / batch})


def total_loss(parts: List[Tuple[LossOutput, float]]) -> LossOutput:
    """
    Weighted sum of loss parts. Gradients on the same named input are summed;
    their shapes must agree.
    """
    if not parts:
        raise InvalidInput("total_loss needs at least one part")
    value = 0.0
    grads: Dict[str, np.ndarray] = {}
    extras: Dict[str, Any] = {}
    for index, (part, weight) in enumerate(parts):
        if weight < 0:
            raise InvalidInput(f"Loss weights must be nonnegative, got {weight}")
        value += weight * part.value
        for name, grad in part.grad_student.items():
            if name in grads:
                if grads[name].shape != grad.shape:
                    raise InvalidInput(
                        f"Gradient shape mismatch on '{name}': {grads[name].shape} vs {grad.shape}")
                grads[name] = grads[name] + weight * grad
            else:
                grads[name] = weight * grad
        extras[f"part_{index}"] = part.value
    return LossOutput(value=value, grad_student=grads, extras=extras)
