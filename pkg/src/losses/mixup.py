"""
Fixed-teacher Mixup: inputs are mixed, and the supervision is recombined from
the teacher outputs already cached for the original samples, so mixing never
triggers a new teacher call.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.losses.base_losses import (
    KdConfig, LossOutput, kd_target_loss_batch, soft_ce_loss_batch, total_loss,
)
from src.numerics.core_math import as_finite_array, stable_softmax
from src.numerics.rng import RngStream

MIX_SPACES = ("prob", "logit")


@dataclass(frozen=True)
class MixupConfig:
    num_samples: int = 2          # 2 = classic pair mixing, 3 = three-sample variant
    mix_space: str = "prob"       # recombine teacher probabilities or raw logits
    kd: KdConfig = field(default_factory=KdConfig)

    def __post_init__(self):
        if self.num_samples not in (2, 3):
            raise InvalidInput(f"Mixup supports 2 or 3 samples, got {self.num_samples}")
        if self.mix_space not in MIX_SPACES:
            raise InvalidInput(f"Unknown mix space '{self.mix_space}'")


def draw_mixup_weights(rng: RngStream, num_samples: int = 2) -> np.ndarray:
    """
    One draw per batch: lambda ~ Uniform(0, 1) for pairs; for three samples,
    three independent Uniform(0, 1) weights normalized to sum to one.
    """
    if num_samples == 2:
        lam = float(rng.uniform(0.0, 1.0))
        return np.array([lam, 1.0 - lam])
    raw = rng.uniform(0.0, 1.0, size=num_samples)
    return raw / np.sum(raw)


def _check_weights(weights: np.ndarray, count: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (count,):
        raise InvalidInput(f"Expected {count} mixing weights, got shape {weights.shape}")
    if np.any(weights < 0) or np.any(weights > 1) or abs(float(np.sum(weights)) - 1.0) > 1e-9:
        raise InvalidInput("Mixing weights must lie in [0, 1] and sum to one")
    return weights


def _onehot(label: int, num_classes: int) -> np.ndarray:
    if not 0 <= int(label) < num_classes:
        raise InvalidInput(f"Class label {label} out of range [0, {num_classes})")
    vec = np.zeros(num_classes)
    vec[int(label)] = 1.0
    return vec


def mixup_fixed_group(xs: Sequence[Sequence[float]], ps: Sequence[Sequence[float]],
                      ys: Sequence[int], weights: Sequence[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convex combination of inputs, teacher probabilities and one-hot labels."""
    weights = _check_weights(np.asarray(weights), len(xs))
    if not (len(xs) == len(ps) == len(ys)):
        raise InvalidInput("Mixup needs one probability vector and label per input")
    xs = [as_finite_array(x, "features") for x in xs]
    ps = [np.asarray(p, dtype=np.float64) for p in ps]
    num_classes = ps[0].shape[0]
    x_mix = np.zeros_like(xs[0])
    p_target = np.zeros(num_classes)
    y_soft = np.zeros(num_classes)
    for w, x, p, y in zip(weights, xs, ps, ys):
        x_mix = x_mix + w * x
        p_target = p_target + w * p
        y_soft = y_soft + w * _onehot(y, num_classes)
    return x_mix, p_target, y_soft


def mixup_fixed_pair(x_i: Sequence[float], x_j: Sequence[float],
                     p_i: Sequence[float], p_j: Sequence[float],
                     y_i: int, y_j: int, lam: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair mixing with weight `lam` on the first sample."""
    if not 0.0 <= lam <= 1.0:
        raise InvalidInput(f"Mixup lambda must lie in [0, 1], got {lam}")
    return mixup_fixed_group([x_i, x_j], [p_i, p_j], [y_i, y_j], [lam, 1.0 - lam])


def mixup_teacher_targets(teacher_logits: np.ndarray, weights: np.ndarray,
                          cfg: MixupConfig) -> np.ndarray:
    """
    Recombined teacher supervision for a batch.

    Args:
        teacher_logits: (S, B, C) cached logits of the S mixed sources per row.
        weights: (S,) batch-level mixing weights.
        cfg: selects probability-space or logit-space recombination.

    Returns:
        (B, C) target distributions at the KD temperature.
    """
    temperature = cfg.kd.temperature
    if cfg.mix_space == "prob":
        probs = stable_softmax(teacher_logits / temperature)
        return np.tensordot(weights, probs, axes=1)
    mixed = np.tensordot(weights, teacher_logits, axes=1)
    return stable_softmax(mixed / temperature)


def mixup_supervision_loss_batch(logits: np.ndarray, soft_labels: np.ndarray,
                                 teacher_targets: np.ndarray, cfg: MixupConfig,
                                 ce_weight: float = 1.0, kd_weight: float = 1.0) -> LossOutput:
    """Cross-entropy on the mixed labels plus KD against the recombined teacher targets."""
    ce = soft_ce_loss_batch(logits, soft_labels)
    kd = kd_target_loss_batch(logits, teacher_targets, cfg.kd)
    out = total_loss([(ce, ce_weight), (kd, kd_weight)])
    out.extras = {"ce": ce.value, "kd": kd.value}
    return out
