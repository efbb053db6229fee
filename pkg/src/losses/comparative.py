"""
Comparative distillation losses.

The student is asked to reproduce the teacher's *comparison* between two
groups of samples: each group is reduced to its centroid, the two centroids
are combined with the configured comparison function, and the softmax of the
student's combination is matched to the teacher's with a KL divergence.
Pairs are the k = 2 case (two singleton groups) and run through the same code.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.losses.base_losses import KL_DIRECTIONS, LossOutput, softmax_kl_with_grad
from src.numerics.core_math import ComparisonSpec, as_finite_array, centroid
from src.numerics.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CkdConfig:
    k: int = 3
    comparison: ComparisonSpec = field(default_factory=ComparisonSpec)
    beta: float = 1.0
    kl_direction: str = "student_first"
    temperature: float = 1.0

    def __post_init__(self):
        if self.k < 2:
            raise InvalidInput(f"k must be at least 2, got {self.k}")
        if self.beta < 0:
            raise InvalidInput(f"beta must be nonnegative, got {self.beta}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise InvalidInput(f"Unknown KL direction '{self.kl_direction}'")
        if not self.temperature > 0:
            raise InvalidInput(f"Temperature must be positive, got {self.temperature}")


def split_sizes(k: int) -> Tuple[int, int]:
    """Group sizes (|A|, |B|) = (ceil(k/2), floor(k/2))."""
    return (k + 1) // 2, k // 2


def ckd_group_loss_batch(student_a: np.ndarray, student_b: np.ndarray,
                         teacher_a: np.ndarray, teacher_b: np.ndarray,
                         cfg: CkdConfig, rng: Optional[RngStream] = None,
                         alpha: Optional[np.ndarray] = None) -> LossOutput:
    """
    Batched comparative loss over B groups.

    Args:
        student_a, teacher_a: (B, |A|, D) representations of group A members.
        student_b, teacher_b: (B, |B|, D) representations of group B members.
        cfg: loss configuration; |A| + |B| must equal cfg.k.
        rng: stream for interpolation weights (one alpha per group).
        alpha: optional explicit interpolation weights, shape (B,) or scalar.

    Returns:
        LossOutput with the batch-mean value and gradients "A" and "B"
        shaped like the student inputs.
    """
    student_a = as_finite_array(student_a, "student group A")
    student_b = as_finite_array(student_b, "student group B")
    teacher_a = as_finite_array(teacher_a, "teacher group A")
    teacher_b = as_finite_array(teacher_b, "teacher group B")
    if student_a.ndim != 3 or student_b.ndim != 3:
        raise InvalidInput("Group batches must have shape (B, group size, D)")
    if student_a.shape != teacher_a.shape or student_b.shape != teacher_b.shape:
        raise InvalidInput("Student and teacher groups must index the same samples")
    batch, size_a, dim = student_a.shape
    size_b = student_b.shape[1]
    if size_a == 0 or size_b == 0:
        raise InvalidInput("Comparison groups must be nonempty")
    if student_b.shape[0] != batch or student_b.shape[2] != dim:
        raise InvalidInput(f"Dimension mismatch: {student_a.shape} vs {student_b.shape}")
    if (size_a, size_b) != split_sizes(cfg.k):
        raise InvalidInput(
            f"Group sizes ({size_a}, {size_b}) do not match the split for k={cfg.k}: {split_sizes(cfg.k)}")

    lambda1, lambda2 = cfg.comparison.weights(rng=rng, size=batch, alpha=alpha)
    l1 = lambda1[:, None]
    l2 = lambda2[:, None]
    student_cmp = l1 * centroid(student_a) + l2 * centroid(student_b)
    teacher_cmp = l1 * centroid(teacher_a) + l2 * centroid(teacher_b)

    values, grad_cmp = softmax_kl_with_grad(student_cmp, teacher_cmp,
                                            direction=cfg.kl_direction,
                                            temperature=cfg.temperature)
    grad_cmp = grad_cmp / batch
    grad_a = np.broadcast_to(((l1 * grad_cmp) / size_a)[:, None, :], student_a.shape).copy()
    grad_b = np.broadcast_to(((l2 * grad_cmp) / size_b)[:, None, :], student_b.shape).copy()
    return LossOutput(
        value=float(np.mean(values)),
        grad_student={"A": grad_a, "B": grad_b},
        extras={"lambda1": lambda1, "lambda2": lambda2, "per_group": values},
    )


def ckd_pair_loss(zh_i: Sequence[float], zh_j: Sequence[float],
                  z_i: Sequence[float], z_j: Sequence[float],
                  cfg: CkdConfig = CkdConfig(k=2), rng: Optional[RngStream] = None,
                  alpha: Optional[float] = None) -> LossOutput:
    """KL between softmax(phi(zh_i, zh_j)) and softmax(phi(z_i, z_j))."""
    if cfg.k != 2:
        raise InvalidInput(f"Pair loss requires k == 2, got k={cfg.k}")
    vectors = [as_finite_array(v) for v in (zh_i, zh_j, z_i, z_j)]
    if len({v.shape for v in vectors}) != 1 or vectors[0].ndim != 1:
        raise InvalidInput("Pair loss needs four vectors of equal dimension")
    zh_i, zh_j, z_i, z_j = (v[None, None, :] for v in vectors)
    out = ckd_group_loss_batch(zh_i, zh_j, z_i, z_j, cfg, rng=rng, alpha=alpha)
    return LossOutput(
        value=out.value,
        grad_student={"zh_i": out.grad_student["A"][0, 0], "zh_j": out.grad_student["B"][0, 0]},
        extras=out.extras,
    )


def _stack_group(group: Sequence[Sequence[float]], name: str) -> np.ndarray:
    if len(group) == 0:
        raise InvalidInput(f"Group {name} is empty")
    arr = as_finite_array(np.asarray(group, dtype=np.float64), name)
    if arr.ndim != 2:
        raise InvalidInput(f"Group {name} must be a list of equal-length vectors")
    return arr


def ckd_group_loss(Zh_A: Sequence[Sequence[float]], Zh_B: Sequence[Sequence[float]],
                   Z_A: Sequence[Sequence[float]], Z_B: Sequence[Sequence[float]],
                   cfg: CkdConfig = CkdConfig(), rng: Optional[RngStream] = None,
                   alpha: Optional[float] = None) -> LossOutput:
    """Comparative loss between group centroids; k = |A| + |B|."""
    arrays = [_stack_group(g, n) for g, n in ((Zh_A, "Zh_A"), (Zh_B, "Zh_B"), (Z_A, "Z_A"), (Z_B, "Z_B"))]
    out = ckd_group_loss_batch(*(a[None] for a in arrays), cfg=cfg, rng=rng, alpha=alpha)
    return LossOutput(
        value=out.value,
        grad_student={"Zh_A": out.grad_student["A"][0], "Zh_B": out.grad_student["B"][0]},
        extras=out.extras,
    )


def ckd_on_features(Fh_A: Sequence[Sequence[float]], Fh_B: Sequence[Sequence[float]],
                    F_A: Sequence[Sequence[float]], F_B: Sequence[Sequence[float]],
                    cfg: CkdConfig = CkdConfig(), rng: Optional[RngStream] = None,
                    alpha: Optional[float] = None) -> LossOutput:
    """
    The comparative loss on intermediate features. Student features must already
    have the teacher's hint dimension (apply the hint regressor first).
    """
    out = ckd_group_loss(Fh_A, Fh_B, F_A, F_B, cfg=cfg, rng=rng, alpha=alpha)
    return LossOutput(
        value=out.value,
        grad_student={"Fh_A": out.grad_student["Zh_A"], "Fh_B": out.grad_student["Zh_B"]},
        extras=out.extras,
    )
