"""
Fully-connected ReLU network with hand-written reverse-mode backpropagation.

Parameters live in a flat dict: "W{i}" of shape (widths[i], widths[i+1]) and
"b{i}" of shape (widths[i+1],). The last hidden activation is exposed as the
hint tap used for white-box distillation.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.data.binary_envelope import hash_arrays
from src.errors import HintUnavailable, InvalidInput, NumericalDivergence
from src.numerics.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass
class ForwardCache:
    """Intermediate values kept for the backward pass."""
    activations: List[np.ndarray]          # [x, relu(h1), ..., relu(h_{L-1})]
    pre_activations: List[np.ndarray]      # [h1, ..., h_{L-1}] before the rectifier
    logits: np.ndarray
    hint: Optional[np.ndarray] = field(default=None)


class MlpModel:
    """
    Feed-forward classifier with layer widths [D_in, h_1, ..., C].
    """

    def __init__(self, widths: Sequence[int], params: Dict[str, np.ndarray]):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise InvalidInput(f"Layer widths must list at least two positive sizes, got {widths}")
        self.widths = widths
        for i in range(self.num_layers):
            expected = {f"W{i}": (widths[i], widths[i + 1]), f"b{i}": (widths[i + 1],)}
            for name, shape in expected.items():
                if name not in params or params[name].shape != shape:
                    got = None if name not in params else params[name].shape
                    raise InvalidInput(f"Parameter '{name}' must have shape {shape}, got {got}")
        self.params: Dict[str, np.ndarray] = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def initialize(cls, widths: Sequence[int], rng: RngStream) -> "MlpModel":
        """Fan-in variance-scaled Gaussian weights (std sqrt(2 / fan_in)), zero biases."""
        params: Dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            params[f"W{i}"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            params[f"b{i}"] = np.zeros(fan_out)
        return cls(widths, params)

    @classmethod
    def zeros(cls, widths: Sequence[int]) -> "MlpModel":
        params: Dict[str, np.ndarray] = {}
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
            params[f"W{i}"] = np.zeros((fan_in, fan_out))
            params[f"b{i}"] = np.zeros(fan_out)
        return cls(widths, params)

    @property
    def num_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def num_classes(self) -> int:
        return self.widths[-1]

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def hint_dim(self) -> int:
        """Width of the hint tap; 0 when the network has no hidden layer."""
        return self.widths[-2] if self.num_layers >= 2 else 0

    @property
    def parameter_count(self) -> int:
        return sum(w * v + v for w, v in zip(self.widths[:-1], self.widths[1:]))

    def forward(self, x: np.ndarray) -> ForwardCache:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise InvalidInput(f"Expected a (B, {self.input_dim}) batch, got {x.shape}")
        activations = [x]
        pre_activations = []
        a = x
        for i in range(self.num_layers - 1):
            h = a @ self.params[f"W{i}"] + self.params[f"b{i}"]
            pre_activations.append(h)
            a = np.maximum(h, 0.0)
            activations.append(a)
        last = self.num_layers - 1
        logits = a @ self.params[f"W{last}"] + self.params[f"b{last}"]
        if not np.all(np.isfinite(logits)):
            raise NumericalDivergence("Non-finite activations in the forward pass")
        hint = activations[-1] if self.num_layers >= 2 else None
        return ForwardCache(activations=activations, pre_activations=pre_activations,
                            logits=logits, hint=hint)

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).logits

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def backward(self, cache: ForwardCache, grad_logits: Optional[np.ndarray],
                 grad_hint: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
        """
        Parameter gradients given dL/dlogits and, optionally, dL/dhint.

        Args:
            cache: result of `forward` on the same batch.
            grad_logits: (B, C) upstream gradient; None means zero.
            grad_hint: (B, hint_dim) gradient arriving at the hint tap.
        """
        if grad_hint is not None and self.num_layers < 2:
            raise HintUnavailable("Model has no hidden layer to tap for hints")
        g = np.zeros_like(cache.logits) if grad_logits is None else np.asarray(grad_logits, dtype=np.float64)
        grads: Dict[str, np.ndarray] = {}
        for i in reversed(range(self.num_layers)):
            a_in = cache.activations[i]
            grads[f"W{i}"] = a_in.T @ g
            grads[f"b{i}"] = np.sum(g, axis=0)
            if i == 0:
                break
            g = g @ self.params[f"W{i}"].T
            if grad_hint is not None and i == self.num_layers - 1:
                g = g + grad_hint
            g = g * (cache.pre_activations[i - 1] > 0)
        return grads

    def copy(self) -> "MlpModel":
        return MlpModel(self.widths, {k: v.copy() for k, v in self.params.items()})

    def fingerprint(self) -> str:
        return hash_arrays(self.params)
