"""
Relational baselines applied to output logits: RKD (distance + angle) and
DIST (inter- and intra-class Pearson matching).
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import InvalidInput
from src.losses.base_losses import KdConfig, LossOutput
from src.numerics.core_math import as_finite_array, huber, huber_grad, stable_softmax


@dataclass(frozen=True)
class RkdConfig:
    w_dist: float = 25.0
    w_angle: float = 50.0
    delta: float = 1.0


@dataclass(frozen=True)
class DistConfig:
    w_inter: float = 1.0
    w_intra: float = 1.0
    temperature: float = 1.0


def _check_pair(student: np.ndarray, teacher: np.ndarray, min_rows: int, name: str):
    student = as_finite_array(student, "student batch")
    teacher = as_finite_array(teacher, "teacher batch")
    if student.ndim != 2 or student.shape != teacher.shape:
        raise InvalidInput(f"{name} needs equal (B, C) batches, got {student.shape} vs {teacher.shape}")
    if student.shape[0] < min_rows:
        raise InvalidInput(f"{name} needs a batch of at least {min_rows}, got {student.shape[0]}")
    return student, teacher


def _safe_divide(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    positive = den > 0
    return np.where(positive, num / np.where(positive, den, 1.0), 0.0)


def _distance_term(student: np.ndarray, teacher: np.ndarray, delta: float) -> Tuple[float, np.ndarray]:
    batch = student.shape[0]
    off = ~np.eye(batch, dtype=bool)
    pairs = batch * (batch - 1)

    d_s = np.sqrt(np.sum((student[:, None, :] - student[None, :, :]) ** 2, axis=-1))
    d_t = np.sqrt(np.sum((teacher[:, None, :] - teacher[None, :, :]) ** 2, axis=-1))
    mu_s = d_s[off].mean()
    mu_t = d_t[off].mean()
    if mu_s == 0 or mu_t == 0:
        return 0.0, np.zeros_like(student)

    residual = d_s / mu_s - d_t / mu_t
    value = float(np.sum(huber(residual, delta)[off]) / pairs)

    r = np.where(off, huber_grad(residual, delta) / pairs, 0.0)
    grad_d = r / mu_s - np.sum(r * d_s) / (mu_s ** 2 * pairs)
    grad_d[~off] = 0.0
    weights = _safe_divide(grad_d + grad_d.T, d_s)
    grad = np.sum(weights, axis=1)[:, None] * student - weights @ student
    return value, grad


def _unit_differences(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # diffs[j, i] = x_i - x_j, i.e. anchored at j
    diffs = x[None, :, :] - x[:, None, :]
    norms = np.sqrt(np.sum(diffs ** 2, axis=-1, keepdims=True))
    return _safe_divide(diffs, norms), norms


def _angle_term(student: np.ndarray, teacher: np.ndarray, delta: float) -> Tuple[float, np.ndarray]:
    batch = student.shape[0]
    idx = np.arange(batch)
    valid = ((idx[:, None, None] != idx[None, :, None])
             & (idx[:, None, None] != idx[None, None, :])
             & (idx[None, :, None] != idx[None, None, :]))
    triplets = batch * (batch - 1) * (batch - 2)

    e_s, norms_s = _unit_differences(student)
    e_t, _ = _unit_differences(teacher)
    cos_s = np.einsum("jic,jkc->jik", e_s, e_s)
    cos_t = np.einsum("jic,jkc->jik", e_t, e_t)
    residual = cos_s - cos_t
    value = float(np.sum(huber(residual, delta)[valid]) / triplets)

    r = np.where(valid, huber_grad(residual, delta) / triplets, 0.0)
    sym = r + r.transpose(0, 2, 1)
    grad_e = np.einsum("jik,jkc->jic", sym, e_s)
    radial = np.sum(grad_e * e_s, axis=-1, keepdims=True)
    grad_diff = _safe_divide(grad_e - radial * e_s, norms_s)
    grad = np.sum(grad_diff, axis=0) - np.sum(grad_diff, axis=1)
    return value, grad


def rkd_loss(Zh: np.ndarray, Z: np.ndarray, w_dist: float = 25.0, w_angle: float = 50.0,
             delta: float = 1.0) -> LossOutput:
    """
    Relational KD on a logit batch. Distances are normalized by each party's
    mean pairwise distance; angles are cosines at every anchor over ordered
    triplets of distinct samples.
    """
    student, teacher = _check_pair(Zh, Z, 3, "RKD")
    dist_value, dist_grad = _distance_term(student, teacher, delta)
    angle_value, angle_grad = _angle_term(student, teacher, delta)
    return LossOutput(
        value=w_dist * dist_value + w_angle * angle_value,
        grad_student={"Zh": w_dist * dist_grad + w_angle * angle_grad},
        extras={"distance": dist_value, "angle": angle_value},
    )


def _row_pearson_with_grad(U: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pearson of U[r] with V[r] for every row, and its gradient w.r.t. U."""
    uc = U - U.mean(axis=-1, keepdims=True)
    vc = V - V.mean(axis=-1, keepdims=True)
    nu = np.sqrt(np.sum(uc * uc, axis=-1))
    nv = np.sqrt(np.sum(vc * vc, axis=-1))
    degenerate = (np.ptp(U, axis=-1) == 0) | (np.ptp(V, axis=-1) == 0) | (nu == 0) | (nv == 0)
    nu = np.where(degenerate, 1.0, nu)
    nv = np.where(degenerate, 1.0, nv)
    rho = np.where(degenerate, 0.0, np.sum(uc * vc, axis=-1) / (nu * nv))
    grad = vc / (nu * nv)[:, None] - (rho / nu ** 2)[:, None] * uc
    grad[degenerate] = 0.0
    return rho, grad


def dist_loss(Zh: np.ndarray, Z: np.ndarray, cfg: Optional[KdConfig] = None,
              w_inter: float = DistConfig.w_inter, w_intra: float = DistConfig.w_intra) -> LossOutput:
    """
    DIST on temperature-softened probabilities: one minus the Pearson
    correlation, averaged over rows (inter-class) and over columns (intra-class).
    Without a cfg the temperature is DistConfig.temperature (1), as in training.
    """
    student, teacher = _check_pair(Zh, Z, 2, "DIST")
    batch, num_classes = student.shape
    temperature = cfg.temperature if cfg is not None else DistConfig.temperature
    y_s = stable_softmax(student / temperature)
    y_t = stable_softmax(teacher / temperature)

    rho_rows, grad_rows = _row_pearson_with_grad(y_s, y_t)
    rho_cols, grad_cols = _row_pearson_with_grad(y_s.T, y_t.T)
    inter = float(np.mean(1.0 - rho_rows))
    intra = float(np.mean(1.0 - rho_cols))

    grad_y = -(w_inter / batch) * grad_rows - (w_intra / num_classes) * grad_cols.T
    grad_z = y_s * (grad_y - np.sum(y_s * grad_y, axis=-1, keepdims=True)) / temperature
    return LossOutput(
        value=w_inter * inter + w_intra * intra,
        grad_student={"Zh": grad_z},
        extras={"inter": inter, "intra": intra},
    )
