"""
Experiment description read from a flat INI file with the sections
[dataset], [teacher], [student], [experiment] and [losses].

Example:

    [dataset]
    classes = 20
    dim = 32
    per_class = 1563
    seed = 0

    [teacher]
    widths = 32, 256, 256, 20
    checkpoint = runs/teacher/teacher.ckpt

    [experiment]
    methods = CE-only, KD, CKD
    budgets = 100, 200, 400
    seeds = 1, 2, 3
"""

import configparser
import dataclasses
import logging
import os
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

from src.data.synthetic import MixtureSpec
from src.errors import InvalidInput
from src.losses.base_losses import KdConfig
from src.losses.comparative import CkdConfig
from src.losses.mixup import MixupConfig
from src.numerics.core_math import COMPARISON_MODES, ComparisonSpec
from src.training.config import METHODS, WHITE_BOX_METHODS, TrainConfig

logger = logging.getLogger(__name__)


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _names(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{text}'")


def _path(text: str) -> Optional[str]:
    return text.strip() or None


# (section, key) -> (field name, parser)
_FIELDS: Dict[Tuple[str, str], Tuple[str, Callable[[str], Any]]] = {
    ("dataset", "path"): ("dataset_path", _path),
    ("dataset", "classes"): ("classes", int),
    ("dataset", "dim"): ("dim", int),
    ("dataset", "per_class"): ("per_class", int),
    ("dataset", "noise"): ("noise", float),
    ("dataset", "scale"): ("scale", float),
    ("dataset", "seed"): ("data_seed", int),
    ("teacher", "widths"): ("teacher_widths", _ints),
    ("teacher", "seed"): ("teacher_seed", int),
    ("teacher", "lr"): ("teacher_lr", float),
    ("teacher", "patience"): ("teacher_patience", int),
    ("teacher", "checkpoint"): ("teacher_checkpoint", _path),
    ("teacher", "table"): ("teacher_table", _path),
    ("teacher", "white_box"): ("white_box", _flag),
    ("student", "widths"): ("student_widths", _ints),
    ("experiment", "methods"): ("methods", _names),
    ("experiment", "budgets"): ("budgets", _ints),
    ("experiment", "k_values"): ("k_values", _ints),
    ("experiment", "seeds"): ("seeds", _ints),
    ("experiment", "lr_grid"): ("lr_grid", _floats),
    ("experiment", "batch_size"): ("batch_size", int),
    ("experiment", "patience"): ("patience", int),
    ("experiment", "patience_unit"): ("patience_unit", str),
    ("experiment", "max_epochs"): ("max_epochs", int),
    ("experiment", "jobs"): ("jobs", int),
    ("experiment", "out"): ("out", str),
    ("losses", "k"): ("k", int),
    ("losses", "comparison"): ("comparison", str),
    ("losses", "beta"): ("beta", float),
    ("losses", "temperature"): ("temperature", float),
    ("losses", "ckd_temperature"): ("ckd_temperature", float),
    ("losses", "mixup_samples"): ("mixup_samples", int),
    ("losses", "mix_space"): ("mix_space", str),
}


@dataclass(frozen=True)
class ExperimentSpec:
    # [dataset]: CSV path, or synthetic mixture parameters when no path is given
    dataset_path: Optional[str] = None
    classes: int = 20
    dim: int = 32
    per_class: int = 1563                    # 1000 train rows per class
    noise: float = 1.0
    scale: float = 3.0
    data_seed: int = 0
    # [teacher]
    teacher_widths: Tuple[int, ...] = (32, 256, 256, 20)
    teacher_seed: int = 0
    teacher_lr: float = 0.1
    teacher_patience: int = 10
    teacher_checkpoint: Optional[str] = None
    teacher_table: Optional[str] = None      # lookup-table teacher CSV instead of a checkpoint
    white_box: bool = False
    # [student]
    student_widths: Tuple[int, ...] = (32, 32, 20)
    # [experiment]
    methods: Tuple[str, ...] = ("CE-only", "KD", "CKD")
    budgets: Tuple[int, ...] = (100, 200, 400, 800)
    k_values: Tuple[int, ...] = (2, 3, 4, 6)
    seeds: Tuple[int, ...] = (1, 2, 3)
    lr_grid: Tuple[float, ...] = (0.1, 0.05, 0.025)
    batch_size: int = 64
    patience: int = 50
    patience_unit: str = "epoch"
    max_epochs: int = 2000
    jobs: int = 1
    out: str = "runs"
    # [losses]
    k: int = 3
    comparison: str = "difference"
    beta: float = 1.0
    temperature: float = 4.0                 # KD and Mixup temperature
    ckd_temperature: float = 1.0
    mixup_samples: int = 2
    mix_space: str = "prob"

    def __post_init__(self):
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise InvalidInput(f"Unknown methods {unknown}. Expected any of {METHODS}")
        if not self.methods or not self.budgets or not self.seeds:
            raise InvalidInput("methods, budgets and seeds must each name at least one value")
        if self.comparison not in COMPARISON_MODES:
            raise InvalidInput(f"Unknown comparison '{self.comparison}'. Expected one of {COMPARISON_MODES}")
        if any(k < 2 for k in self.k_values) or self.k < 2:
            raise InvalidInput("k values must be at least 2")
        if self.jobs < 1:
            raise InvalidInput("jobs must be at least 1")
        white_box_methods = [m for m in self.methods if m in WHITE_BOX_METHODS]
        if white_box_methods and not self.white_box:
            raise InvalidInput(f"{white_box_methods} need white-box teacher access; "
                               f"set white_box = true in [teacher] or pass --white-box")

    @classmethod
    def from_file(cls, path: str, **overrides: Any) -> "ExperimentSpec":
        """Reads an experiment file; non-None overrides replace file values before validation."""
        if not os.path.exists(path):
            raise InvalidInput(f"Experiment file not found: '{path}'")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as e:
            raise InvalidInput(f"Cannot parse experiment file '{path}': {e}")

        values: Dict[str, Any] = {}
        for section in parser.sections():
            for key, text in parser.items(section):
                target = _FIELDS.get((section, key))
                if target is None:
                    raise InvalidInput(f"Unknown setting [{section}] {key} in '{path}'")
                name, parse = target
                try:
                    values[name] = parse(text)
                except ValueError as e:
                    raise InvalidInput(f"Bad value for [{section}] {key} in '{path}': {e}")
        logger.info("Read experiment file %s (%d settings)", path, len(values))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_updates(self, **changes: Any) -> "ExperimentSpec":
        """Copy with every non-None change applied (CLI flags over file values)."""
        applied = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **applied)

    def check_paths(self) -> None:
        """Every referenced input path must exist at launch."""
        for label, path in (("dataset", self.dataset_path), ("teacher checkpoint", self.teacher_checkpoint),
                            ("teacher table", self.teacher_table)):
            if path and not os.path.exists(path):
                raise InvalidInput(f"The {label} '{path}' does not exist")

    def mixture(self) -> MixtureSpec:
        return MixtureSpec(classes=self.classes, dim=self.dim, per_class=self.per_class,
                           noise=self.noise, scale=self.scale, seed=self.data_seed)

    def train_config(self, method: str, n: int, k: Optional[int] = None) -> TrainConfig:
        ckd = CkdConfig(k=self.k if k is None else k, comparison=ComparisonSpec(self.comparison),
                        beta=self.beta, temperature=self.ckd_temperature)
        kd = KdConfig(temperature=self.temperature)
        return TrainConfig(
            method=method,
            n=n,
            batch_size=self.batch_size,
            lr_grid=self.lr_grid,
            patience=self.patience,
            patience_unit=self.patience_unit,
            seeds=self.seeds,
            max_epochs=self.max_epochs,
            student_widths=self.student_widths,
            ckd=ckd,
            kd=kd,
            mixup=MixupConfig(num_samples=self.mixup_samples, mix_space=self.mix_space, kd=kd),
        )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)
