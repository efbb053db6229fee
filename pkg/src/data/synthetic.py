"""
Seeded Gaussian-mixture classification data.

Class means are the vertices of a regular simplex, centered and scaled, then
embedded into the feature space through a random orthonormal map. Each class
is split independently: 20% test, and the rest 80/20 into train/val.
"""

import logging
from dataclasses import dataclass

import numpy as np

from src.data.dataset_manager import Dataset
from src.errors import DatasetError
from src.numerics.rng import RngStream

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.2
VAL_FRACTION = 0.2
MIN_PER_CLASS = 3


@dataclass(frozen=True)
class MixtureSpec:
    classes: int = 20
    dim: int = 32
    per_class: int = 1000
    noise: float = 1.0
    scale: float = 3.0
    seed: int = 0


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def split_sizes_for(per_class: int):
    """(train, val, test) counts for one class."""
    n_test = max(1, _round_half_up(TEST_FRACTION * per_class))
    rest = per_class - n_test
    n_val = max(1, _round_half_up(VAL_FRACTION * rest))
    n_train = rest - n_val
    if n_train < 1:
        raise DatasetError(f"per_class={per_class} is too small to form train, val and test splits "
                           f"(need at least {MIN_PER_CLASS})")
    return n_train, n_val, n_test


def class_means(classes: int, dim: int, scale: float, rng: RngStream) -> np.ndarray:
    """(classes, dim) means with equal pairwise distances scale * sqrt(2)."""
    vertices = np.eye(classes) - 1.0 / classes
    # orthonormal basis of the (classes - 1)-dimensional span of the centered vertices
    basis, _ = np.linalg.qr(vertices[:, : classes - 1])
    coords = vertices @ basis
    embed, _ = np.linalg.qr(rng.normal(size=(dim, classes - 1)))
    return scale * coords @ embed.T


def generate_gaussian_mixture(spec: MixtureSpec) -> Dataset:
    if spec.classes < 2:
        raise DatasetError(f"Need at least 2 classes, got {spec.classes}")
    if spec.dim < spec.classes - 1:
        raise DatasetError(f"dim={spec.dim} cannot hold a {spec.classes}-class simplex (need dim >= classes - 1)")
    if spec.noise < 0 or spec.scale <= 0:
        raise DatasetError("noise must be nonnegative and scale positive")
    n_train, n_val, n_test = split_sizes_for(spec.per_class)

    root = RngStream(spec.seed).child("dataset")
    means = class_means(spec.classes, spec.dim, spec.scale, root.child("means"))
    noise_rng = root.child("noise")
    split_rng = root.child("split")

    features = []
    labels = []
    splits = []
    template = np.array(["train"] * n_train + ["val"] * n_val + ["test"] * n_test, dtype=object)
    for c in range(spec.classes):
        eps = noise_rng.normal(0.0, 1.0, size=(spec.per_class, spec.dim))
        features.append(means[c] + spec.noise * eps)
        labels.append(np.full(spec.per_class, c, dtype=np.int64))
        splits.append(template[split_rng.permutation(spec.per_class)])

    total = spec.classes * spec.per_class
    dataset = Dataset(
        sample_ids=np.arange(total, dtype=np.int64),
        features=np.concatenate(features),
        labels=np.concatenate(labels),
        splits=np.concatenate(splits).astype(str),
        num_classes=spec.classes,
    )
    logger.info("Generated %d samples (%d classes, %d dims, noise %.3g): %d/%d/%d per class",
                total, spec.classes, spec.dim, spec.noise, n_train, n_val, n_test)
    return dataset
