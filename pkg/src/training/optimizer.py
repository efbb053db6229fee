"""SGD with heavy-ball momentum and coupled weight decay."""

from typing import Dict, Optional

import numpy as np

from src.errors import InvalidInput


def sgd_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float,
             momentum: float = 0.9, weight_decay: float = 5e-4,
             velocity: Optional[Dict[str, np.ndarray]] = None) -> Dict[str, np.ndarray]:
    """
    One update, applied in place to `params` and `velocity`:
        v <- momentum * v + grad + weight_decay * param
        param <- param - lr * v

    Parameters without a gradient are left untouched. Returns `params`.
    """
    if velocity is None:
        velocity = {}
    for name, grad in grads.items():
        if name not in params:
            raise InvalidInput(f"Gradient for unknown parameter '{name}'")
        param = params[name]
        if grad.shape != param.shape:
            raise InvalidInput(f"Gradient shape {grad.shape} does not match parameter '{name}' {param.shape}")
        v = velocity.get(name)
        if v is None:
            v = np.zeros_like(param)
        v = momentum * v + grad + weight_decay * param
        velocity[name] = v
        param -= lr * v
    return params


class SGD:
    """Holds the velocity buffers for one set of parameters."""

    def __init__(self, params: Dict[str, np.ndarray], lr: float, momentum: float = 0.9,
                 weight_decay: float = 5e-4):
        if lr < 0:
            raise InvalidInput(f"Learning rate must be nonnegative, got {lr}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[str, np.ndarray] = {}
        self.steps = 0

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        sgd_step(self.params, grads, self.lr, self.momentum, self.weight_decay, self.velocity)
        self.steps += 1

    def reset_velocity(self) -> None:
        self.velocity = {}
