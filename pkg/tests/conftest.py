from typing import Callable, Dict

import numpy as np
import pytest

from src.numerics.rng import RngStream

FD_STEP = 1e-5
FD_RTOL = 1e-4
FD_ATOL = 1e-7


def numerical_gradient(f: Callable[[], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central differences of f() with respect to every entry of x (perturbed in place)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = x[idx]
        x[idx] = original + step
        plus = f()
        x[idx] = original - step
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2.0 * step)
    return grad


def assert_gradients_match(f: Callable[[], float], params: Dict[str, np.ndarray],
                           analytic: Dict[str, np.ndarray], rtol: float = FD_RTOL,
                           atol: float = FD_ATOL) -> None:
    """Checks analytic gradients against central differences, parameter by parameter."""
    for name, x in params.items():
        numeric = numerical_gradient(f, x)
        np.testing.assert_allclose(analytic[name], numeric, rtol=rtol, atol=atol,
                                   err_msg=f"gradient mismatch for '{name}'")


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(1234)
