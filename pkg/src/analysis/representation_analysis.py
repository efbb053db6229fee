"""
Representation analyses over logits: how closely a student's class-logit
correlations follow the teacher's, and how flat its logit representations are.
"""

import logging
import os
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.errors import InvalidInput
from src.numerics.core_math import correlation_matrix, singular_values
from src.numerics.rng import RngStream
from src.standard_formats import CorrelationReport, FlatnessCurve
from src.teacher_oracle.base_teacher import BaseTeacher
from src.teacher_oracle.teacher_cache import TeacherCache
from src.training.mlp import MlpModel

logger = logging.getLogger(__name__)

DEFAULT_CORRELATION_SAMPLES = 100

LogitSource = Union[MlpModel, BaseTeacher, TeacherCache]


def logits_from(source: LogitSource, ids: Sequence[int], features: np.ndarray) -> np.ndarray:
    """Stacks the (len(ids), C) logits a model, teacher or teacher cache gives for the samples."""
    if isinstance(source, MlpModel):
        return source.logits(features)
    if isinstance(source, TeacherCache):
        return source.logits_for(ids)
    if isinstance(source, BaseTeacher):
        return np.stack([source.infer(int(i), row)[0] for i, row in zip(ids, features)])
    raise InvalidInput(f"Cannot read logits from {type(source).__name__}")


def correlation_gap(student: LogitSource, teacher: LogitSource, ids: Sequence[int], features: np.ndarray,
                    m: int = DEFAULT_CORRELATION_SAMPLES, seed: int = 0) -> CorrelationReport:
    """
    Mean absolute entrywise difference between the class-logit correlation
    matrices of two models over m samples drawn by seed.

    Args:
        student, teacher: models, teachers or teacher caches producing C logits.
        ids: ids of the evaluation samples.
        features: (len(ids), D) features of the evaluation samples.
        m: number of samples to draw (at least 2).
        seed: drawing seed.

    Returns:
        CorrelationReport; metric is in [0, 2] and 0 when both matrices agree.
    """
    ids = np.asarray(ids, dtype=np.int64)
    features = np.asarray(features, dtype=np.float64)
    if m < 2:
        raise InvalidInput(f"Correlation needs at least 2 samples, got m={m}")
    if m > len(ids):
        raise InvalidInput(f"m={m} exceeds the {len(ids)} evaluation samples")
    if len(features) != len(ids):
        raise InvalidInput("ids and features have different lengths")

    positions = np.sort(RngStream(seed).child("correlation", m).choice(len(ids), m, replace=False))
    chosen_ids = ids[positions]
    z_student = logits_from(student, chosen_ids, features[positions])
    z_teacher = logits_from(teacher, chosen_ids, features[positions])
    if z_student.shape != z_teacher.shape:
        raise InvalidInput(f"Logit shapes differ: {z_student.shape} vs {z_teacher.shape}")

    corr_s = correlation_matrix(z_student)
    corr_t = correlation_matrix(z_teacher)
    metric = float(np.mean(np.abs(corr_s - corr_t)))
    return {
        "teacher_corr": corr_t.tolist(),
        "student_corr": corr_s.tolist(),
        "metric": metric,
        "m": m,
        "sample_ids": [int(i) for i in chosen_ids],
    }


def _curve(z: np.ndarray, width: int, normalize: bool) -> np.ndarray:
    centered = z - z.mean(axis=0, keepdims=True)
    sigma = singular_values(centered)
    if normalize and sigma[0] > 0:
        sigma = sigma / sigma[0]
    padded = np.zeros(width)
    padded[: min(width, len(sigma))] = sigma[:width]
    return padded


def flatness_curve(source: LogitSource, ids: Sequence[int], features: np.ndarray,
                   labels: Optional[Sequence[int]] = None, per_class: bool = True,
                   normalize: bool = True) -> FlatnessCurve:
    """
    Sorted singular values of centered logit representations.

    In per-class mode each class's logit rows are centered on their own mean
    and the class curves are averaged; classes with fewer than 2 samples are
    skipped with a warning. Pooled mode centers all rows together. Curves are
    zero-padded to C values.
    """
    ids = np.asarray(ids, dtype=np.int64)
    z = logits_from(source, ids, np.asarray(features, dtype=np.float64))
    num_classes = z.shape[1]
    counts: Dict[int, int] = {}

    if per_class:
        if labels is None:
            raise InvalidInput("Per-class flatness needs labels")
        labels = np.asarray(labels, dtype=np.int64)
        if len(labels) != len(z):
            raise InvalidInput("labels and samples have different lengths")
        curves: List[np.ndarray] = []
        for c in np.unique(labels):
            rows = z[labels == c]
            if len(rows) < 2:
                logger.warning("Flatness: class %d has %d sample(s); skipped", c, len(rows))
                continue
            curves.append(_curve(rows, num_classes, normalize))
            counts[int(c)] = len(rows)
        if not curves:
            raise InvalidInput("No class has the 2 samples a flatness curve needs")
        values = np.mean(curves, axis=0)
    else:
        if len(z) < 2:
            raise InvalidInput("Pooled flatness needs at least 2 samples")
        values = _curve(z, num_classes, normalize)
        if labels is not None:
            uniq, freq = np.unique(np.asarray(labels, dtype=np.int64), return_counts=True)
            counts = {int(c): int(k) for c, k in zip(uniq, freq)}

    # averaging can leave rounding-level bumps
    values = np.minimum.accumulate(np.clip(values, 0.0, None))
    return {
        "values": values.tolist(),
        "per_class": per_class,
        "normalized": normalize,
        "num_classes": num_classes,
        "samples_per_class": counts,
    }


def write_curve(path: str, values: Sequence[float]) -> None:
    """Plain curve file: one value per line."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for v in values:
            f.write(f"{float(v):.17g}\n")
