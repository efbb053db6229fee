"""
Numerically stable primitives shared by the loss, training and analysis code.

All functions accept array-likes and return new numpy arrays (or floats); no
argument is modified in place. Vector operations act on the last axis so the
same code serves single instances and leading batch axes.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidInput
from src.numerics.rng import RngStream

logger = logging.getLogger(__name__)

KL_EPSILON = 1e-12
JACOBI_TOLERANCE = 1e-10
JACOBI_MAX_SWEEPS = 100

COMPARISON_MODES = ("difference", "addition", "interpolation")

ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]]]


def as_finite_array(x: ArrayLike, name: str = "input") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class ComparisonSpec:
    """
    Linear comparison phi(a, b) = lambda1 * a + lambda2 * b.

    difference -> (1, -1), addition -> (1, 1), interpolation -> (alpha, 1 - alpha)
    with alpha drawn from Beta(1, 1) on every use.
    """
    mode: str = "difference"

    def __post_init__(self):
        if self.mode not in COMPARISON_MODES:
            raise InvalidInput(f"Unknown comparison mode '{self.mode}'. Expected one of {COMPARISON_MODES}")

    @property
    def is_random(self) -> bool:
        return self.mode == "interpolation"

    def fixed_weights(self) -> Tuple[float, float]:
        if self.mode == "difference":
            return 1.0, -1.0
        if self.mode == "addition":
            return 1.0, 1.0
        raise InvalidInput("Interpolation weights are drawn per use; pass an RngStream or alpha")

    def weights(self, rng: Optional[RngStream] = None, size: int = 1,
                alpha: Optional[Union[float, np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Returns (lambda1, lambda2) as arrays of shape (size,).
        In interpolation mode alpha is taken from `alpha` when given, otherwise
        drawn from Beta(1, 1) through `rng`.
        """
        if not self.is_random:
            l1, l2 = self.fixed_weights()
            return np.full(size, l1), np.full(size, l2)
        if alpha is None:
            if rng is None:
                raise InvalidInput("Interpolation comparison requires an RngStream")
            alpha = rng.beta(1.0, 1.0, size=size)
        alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), (size,)).copy()
        return alpha, 1.0 - alpha


def stable_softmax(z: ArrayLike) -> np.ndarray:
    """Softmax over the last axis after subtracting the per-vector maximum."""
    z = as_finite_array(z, "logits")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def log_softmax(z: ArrayLike) -> np.ndarray:
    """Log of the softmax over the last axis, finite for all finite inputs."""
    z = as_finite_array(z, "logits")
    shifted = z - np.max(z, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def kl_divergence(p: ArrayLike, q: ArrayLike) -> Union[float, np.ndarray]:
    """
    KL(p || q) in nats over the last axis, with 0 * ln(0 / q) := 0 and q
    clamped below by 1e-12 before the logarithm.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidInput(f"Dimension mismatch: {p.shape} vs {q.shape}")
    q_safe = np.maximum(q, KL_EPSILON)
    positive = p > 0
    ratio = np.where(positive, p, 1.0) / q_safe
    terms = np.where(positive, p * np.log(ratio), 0.0)
    result = np.sum(terms, axis=-1)
    return float(result) if result.ndim == 0 else result


def compare(a: ArrayLike, b: ArrayLike, spec: ComparisonSpec,
            rng: Optional[RngStream] = None, alpha: Optional[float] = None) -> np.ndarray:
    """Applies phi(a, b) = lambda1 * a + lambda2 * b."""
    a = as_finite_array(a, "a")
    b = as_finite_array(b, "b")
    if a.shape != b.shape:
        raise InvalidInput(f"Dimension mismatch: {a.shape} vs {b.shape}")
    l1, l2 = spec.weights(rng=rng, size=1, alpha=alpha)
    if spec.is_random:
        logger.debug("Interpolation comparison drew alpha=%.17g", l1[0])
    return l1[0] * a + l2[0] * b


def centroid(group: ArrayLike) -> np.ndarray:
    """
    Coordinate-wise mean of a group of equal-length vectors. A leading batch
    axis is allowed: (B, g, D) -> (B, D).
    """
    arr = np.asarray(group, dtype=np.float64)
    if arr.size == 0 or arr.ndim < 2 or arr.shape[-2] == 0:
        raise InvalidInput("Centroid of an empty group is undefined")
    return np.mean(arr, axis=-2)


def pearson(u: ArrayLike, v: ArrayLike) -> float:
    """Pearson correlation; 0 when either vector is constant."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise InvalidInput(f"Dimension mismatch: {u.shape} vs {v.shape}")
    if u.size < 2:
        raise InvalidInput("Pearson correlation needs at least two observations")
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        return 0.0
    uc = u - u.mean()
    vc = v - v.mean()
    denom = np.sqrt(np.dot(uc, uc) * np.dot(vc, vc))
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(uc, vc) / denom, -1.0, 1.0))


def correlation_matrix(X: ArrayLike) -> np.ndarray:
    """
    Column correlation matrix of an m x C sample matrix. Constant columns get a
    zero row/column and a unit diagonal entry.
    """
    X = as_finite_array(X, "matrix")
    if X.ndim != 2 or X.shape[0] < 2:
        raise InvalidInput("Correlation matrix needs a 2-D matrix with at least two rows")
    centered = X - X.mean(axis=0, keepdims=True)
    cov = centered.T @ centered
    constant = np.ptp(X, axis=0) == 0
    std = np.sqrt(np.diag(cov))
    std = np.where(constant | (std == 0), 1.0, std)
    corr = cov / np.outer(std, std)
    corr[constant, :] = 0.0
    corr[:, constant] = 0.0
    corr = 0.5 * (corr + corr.T)
    corr = np.clip(corr, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return corr


def symmetric_eigenvalues(G: np.ndarray, tol: float = JACOBI_TOLERANCE,
                          max_sweeps: int = JACOBI_MAX_SWEEPS) -> np.ndarray:
    """
    Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Sweeps stop
    once the off-diagonal Frobenius norm is below `tol` times the matrix norm.
    """
    A = np.array(G, dtype=np.float64, copy=True)
    size = A.shape[0]
    scale = np.linalg.norm(A)
    if size == 1 or scale == 0:
        return np.diag(A).copy()

    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = 0.0
                A[q, p] = 0.0
    else:
        logger.warning("Jacobi iteration did not converge in %d sweeps", max_sweeps)
    return np.diag(A).copy()


def singular_values(X: ArrayLike) -> np.ndarray:
    """
    Singular values of an m x C matrix, descending, via Jacobi eigenvalues of
    the smaller Gram matrix.
    """
    X = as_finite_array(X, "matrix")
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InvalidInput("Singular values need a 2-D matrix")
    m, c = X.shape
    gram = X.T @ X if m >= c else X @ X.T
    gram = 0.5 * (gram + gram.T)
    eig = symmetric_eigenvalues(gram)
    sigma = np.sqrt(np.clip(eig, 0.0, None))
    return np.sort(sigma)[::-1]


def huber(x: ArrayLike, delta: float = 1.0) -> Union[float, np.ndarray]:
    """0.5 x^2 for |x| <= delta, delta (|x| - 0.5 delta) otherwise."""
    if delta <= 0:
        raise InvalidInput("Huber delta must be positive")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax <= delta, 0.5 * x * x, delta * (ax - 0.5 * delta))
    return float(out) if out.ndim == 0 else out


def huber_grad(x: ArrayLike, delta: float = 1.0) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) <= delta, x, delta * np.sign(x))
