"""FitNets hint loss with a trainable affine regressor."""

from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np

from src.errors import InvalidInput
from src.losses.base_losses import LossOutput
from src.numerics.core_math import as_finite_array
from src.numerics.rng import RngStream


@dataclass(frozen=True)
class HintConfig:
    weight: float = 100.0


@dataclass
class HintRegressor:
    """Affine map r(f) = W f + b from student-feature to teacher-hint dimension."""
    weight: np.ndarray   # (D_teacher, D_student)
    bias: np.ndarray     # (D_teacher,)

    @classmethod
    def identity(cls, dim: int) -> "HintRegressor":
        return cls(weight=np.eye(dim), bias=np.zeros(dim))

    @classmethod
    def initialize(cls, d_in: int, d_out: int, rng: RngStream) -> "HintRegressor":
        weight = rng.normal(0.0, np.sqrt(1.0 / d_in), size=(d_out, d_in))
        return cls(weight=weight, bias=np.zeros(d_out))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def params(self) -> Dict[str, np.ndarray]:
        return {"reg_W": self.weight, "reg_b": self.bias}

    def __call__(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.in_dim:
            raise InvalidInput(f"Regressor expects {self.in_dim} features, got {features.shape[-1]}")
        return features @ self.weight.T + self.bias

    def backward(self, features: np.ndarray, grad_out: np.ndarray) -> Dict[str, np.ndarray]:
        """Gradients for a (B, D_s) input batch given dL/d(output) of shape (B, D_t)."""
        return {
            "features": grad_out @ self.weight,
            "reg_W": grad_out.T @ features,
            "reg_b": np.sum(grad_out, axis=0),
        }

    def copy(self) -> "HintRegressor":
        return HintRegressor(weight=self.weight.copy(), bias=self.bias.copy())


def fitnets_hint_loss_batch(features: np.ndarray, hints: np.ndarray,
                            regressor: HintRegressor) -> LossOutput:
    """Batch mean of (1/D) * ||regressor(f) - hint||^2."""
    features = as_finite_array(features, "student features")
    hints = as_finite_array(hints, "teacher hints")
    if features.ndim != 2 or hints.ndim != 2 or features.shape[0] != hints.shape[0]:
        raise InvalidInput(f"Hint loss needs (B, D) batches, got {features.shape} and {hints.shape}")
    if regressor.out_dim != hints.shape[1]:
        raise InvalidInput(
            f"Regressor output dimension {regressor.out_dim} does not match hint dimension {hints.shape[1]}")
    regressed = regressor(features)
    batch, dim = hints.shape
    residual = regressed - hints
    value = float(np.mean(np.sum(residual ** 2, axis=1) / dim))
    grads = regressor.backward(features, 2.0 * residual / (dim * batch))
    return LossOutput(value=value, grad_student=grads)


def fitnets_hint_loss(f_hat: Sequence[float], hint: Sequence[float],
                      regressor_weights: Optional[HintRegressor] = None) -> LossOutput:
    """Single-sample hint loss; the identity regressor is used when none is given."""
    f_hat = as_finite_array(f_hat, "f_hat")
    hint = as_finite_array(hint, "hint")
    regressor = regressor_weights or HintRegressor.identity(f_hat.shape[0])
    out = fitnets_hint_loss_batch(f_hat[None, :], hint[None, :], regressor)
    return LossOutput(
        value=out.value,
        grad_student={"f_hat": out.grad_student["features"][0],
                      "reg_W": out.grad_student["reg_W"],
                      "reg_b": out.grad_student["reg_b"]},
    )
