import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from src.errors import DatasetError, InvalidInput

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    """
    Labelled feature vectors with a fixed train/val/test assignment.
    Row i has id sample_ids[i]; ids are unique.
    """
    sample_ids: np.ndarray     # (N,) int64
    features: np.ndarray       # (N, D) float64
    labels: np.ndarray         # (N,) int64
    splits: np.ndarray         # (N,) one of SPLITS
    num_classes: int

    def __post_init__(self):
        n = len(self.sample_ids)
        if self.features.ndim != 2 or self.features.shape[0] != n or len(self.labels) != n or len(self.splits) != n:
            raise DatasetError("Dataset columns have inconsistent lengths")
        if len(np.unique(self.sample_ids)) != n:
            raise DatasetError("Dataset sample ids are not unique")
        unknown = set(np.unique(self.splits)) - set(SPLITS)
        if unknown:
            raise DatasetError(f"Unknown split labels: {sorted(unknown)}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(f"Labels must lie in [0, {self.num_classes})")
        self._row_of: Dict[int, int] = {int(i): r for r, i in enumerate(self.sample_ids)}

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def ids(self, split: str) -> np.ndarray:
        if split not in SPLITS:
            raise InvalidInput(f"Unknown split '{split}'")
        return self.sample_ids[self.splits == split]

    def rows(self, ids: Sequence[int]) -> np.ndarray:
        try:
            return np.array([self._row_of[int(i)] for i in ids], dtype=np.int64)
        except KeyError as e:
            raise InvalidInput(f"Sample id {e.args[0]} is not in the dataset")

    def take(self, ids: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """(features, labels) for the given ids, in order."""
        rows = self.rows(ids)
        return self.features[rows], self.labels[rows]

    def split_arrays(self, split: str) -> Tuple[np.ndarray, np.ndarray]:
        mask = self.splits == split
        return self.features[mask], self.labels[mask]


class DatasetManager:
    """
    Loads and writes feature datasets as CSV: columns 'sample_id', 'split',
    'label', then 'x0'..'x{D-1}'. Floats are written with 17 significant
    digits so a reload is bit-exact.
    """
    def __init__(self, dataset_path: str):
        self.dataset_path = dataset_path
        self.dataset: Dataset = self._load_dataset()
        logger.info("Loaded dataset %s: %d samples, %d classes, %d dims",
                    dataset_path, len(self.dataset.sample_ids), self.dataset.num_classes, self.dataset.dim)

    def _load_dataset(self) -> Dataset:
        if not os.path.exists(self.dataset_path):
            raise DatasetError(f"Dataset not found at '{self.dataset_path}'. Run 'gen-data' first.")
        try:
            df = pd.read_csv(self.dataset_path, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DatasetError(f"Error reading dataset CSV '{self.dataset_path}': {e}")

        missing = [c for c in ("sample_id", "split", "label") if c not in df.columns]
        feature_cols = [c for c in df.columns if c.startswith("x") and c[1:].isdigit()]
        if missing or not feature_cols:
            raise DatasetError(f"Dataset '{self.dataset_path}' is missing columns: {missing or ['x0..']}")
        feature_cols.sort(key=lambda c: int(c[1:]))
        if df[feature_cols].isna().any().any():
            raise DatasetError(f"Dataset '{self.dataset_path}' has empty feature cells")

        labels = df["label"].astype(np.int64).to_numpy()
        return Dataset(
            sample_ids=df["sample_id"].astype(np.int64).to_numpy(),
            features=df[feature_cols].to_numpy(dtype=np.float64),
            labels=labels,
            splits=df["split"].astype(str).to_numpy(),
            num_classes=int(labels.max()) + 1,
        )

    @staticmethod
    def write_dataset(dataset: Dataset, path: str) -> None:
        frame = pd.DataFrame(dataset.features, columns=[f"x{d}" for d in range(dataset.dim)])
        frame.insert(0, "label", dataset.labels)
        frame.insert(0, "split", dataset.splits)
        frame.insert(0, "sample_id", dataset.sample_ids)
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g")
        logger.info("Wrote %d samples to %s", len(frame), path)

    def split_counts(self) -> Dict[str, int]:
        return {s: int(np.sum(self.dataset.splits == s)) for s in SPLITS}

    def classes_in(self, split: str) -> List[int]:
        return sorted(int(c) for c in np.unique(self.dataset.labels[self.dataset.splits == split]))
