"""Training configuration with the reference protocol defaults."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from src.errors import InvalidInput
from src.losses.base_losses import KdConfig
from src.losses.comparative import CkdConfig
from src.losses.hint import HintConfig
from src.losses.mixup import MixupConfig
from src.losses.relational import DistConfig, RkdConfig

logger = logging.getLogger(__name__)

METHODS = ("CE-only", "KD", "CKD", "RKD", "DIST", "MixupFixed", "FitNets", "FitNets+CKD")
WHITE_BOX_METHODS = ("FitNets", "FitNets+CKD")
PATIENCE_UNITS = ("epoch", "step")

# (cross-entropy weight, teacher-term weight) per method, following the
# defaults of the reference KD training code.
DEFAULT_LOSS_WEIGHTS: Dict[str, Tuple[float, float]] = {
    "CE-only": (1.0, 0.0),
    "KD": (0.1, 0.9),
    "CKD": (1.0, 1.0),           # teacher weight unused; CKD uses ckd.beta
    "RKD": (1.0, 1.0),
    "DIST": (1.0, 1.0),
    "MixupFixed": (0.1, 0.9),
    "FitNets": (1.0, 0.0),       # hint term weighted by hint.weight
    "FitNets+CKD": (1.0, 0.0),
}


@dataclass(frozen=True)
class TrainConfig:
    method: str = "CKD"
    n: int = 100
    batch_size: int = 64
    lr_grid: Tuple[float, ...] = (0.1, 0.05, 0.025)
    momentum: float = 0.9
    weight_decay: float = 5e-4
    patience: int = 50
    patience_unit: str = "epoch"
    max_decays: int = 3
    decay_factor: float = 0.1
    seeds: Tuple[int, ...] = (1, 2, 3)
    steps_per_epoch: Optional[int] = None      # None: one optimizer step per budgeted sample
    max_epochs: int = 2000
    student_widths: Tuple[int, ...] = (32, 32, 20)
    ce_weight: Optional[float] = None          # None: DEFAULT_LOSS_WEIGHTS
    kd_weight: Optional[float] = None
    ckd: CkdConfig = field(default_factory=CkdConfig)
    kd: KdConfig = field(default_factory=KdConfig)
    rkd: RkdConfig = field(default_factory=RkdConfig)
    dist: DistConfig = field(default_factory=DistConfig)
    mixup: MixupConfig = field(default_factory=MixupConfig)
    hint: HintConfig = field(default_factory=HintConfig)
    sampler_cap: int = 100_000
    resample_groups_each_epoch: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInput(f"Unknown method '{self.method}'. Expected one of {METHODS}")
        if self.n < 1 or self.batch_size < 1:
            raise InvalidInput("n and batch_size must be positive")
        if not self.lr_grid or any(lr < 0 for lr in self.lr_grid):
            raise InvalidInput("lr_grid must hold at least one nonnegative rate")
        if not self.seeds:
            raise InvalidInput("At least one seed is required")
        if self.patience < 1 or self.max_decays < 0 or not 0 < self.decay_factor <= 1:
            raise InvalidInput("patience >= 1, max_decays >= 0 and decay_factor in (0, 1] are required")
        if self.patience_unit not in PATIENCE_UNITS:
            raise InvalidInput(f"patience_unit must be one of {PATIENCE_UNITS}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise InvalidInput("steps_per_epoch must be positive")
        if self.method == "RKD" and min(self.n, self.batch_size) < 3:
            raise InvalidInput("RKD needs batches of at least 3 samples")
        if self.method == "DIST" and min(self.n, self.batch_size) < 2:
            raise InvalidInput("DIST needs batches of at least 2 samples")
        if self.method in ("CKD", "FitNets+CKD") and self.ckd.k > self.n:
            raise InvalidInput(f"k={self.ckd.k} exceeds the budget n={self.n}")

    @property
    def white_box(self) -> bool:
        return self.method in WHITE_BOX_METHODS

    @property
    def resolved_steps_per_epoch(self) -> int:
        return self.steps_per_epoch if self.steps_per_epoch is not None else self.n

    @property
    def loss_weights(self) -> Tuple[float, float]:
        ce_default, kd_default = DEFAULT_LOSS_WEIGHTS[self.method]
        return (ce_default if self.ce_weight is None else self.ce_weight,
                kd_default if self.kd_weight is None else self.kd_weight)

    def with_updates(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def overrides(self) -> Dict[str, Any]:
        """Fields whose values differ from the defaults."""
        defaults = dataclasses.asdict(TrainConfig(method=self.method))
        current = self.to_dict()
        return {k: v for k, v in current.items() if v != defaults[k]}

    def log_interpretations(self) -> None:
        logger.info("Epoch = %d optimizer steps of batch %d; patience counted in %s evaluations",
                    self.resolved_steps_per_epoch, self.batch_size, self.patience_unit)
        if self.method in ("CKD", "FitNets+CKD"):
            logger.info("CKD: k=%d, comparison=%s, KL direction=%s, temperature=%g, beta=%g",
                        self.ckd.k, self.ckd.comparison.mode, self.ckd.kl_direction,
                        self.ckd.temperature, self.ckd.beta)
        if self.method == "MixupFixed":
            logger.info("Mixup: %d samples, %s-space targets, KD temperature %g",
                        self.mixup.num_samples, self.mixup.mix_space, self.mixup.kd.temperature)
        for name, value in self.overrides().items():
            if name not in ("method", "n", "seeds", "lr_grid"):
                logger.warning("Protocol default overridden: %s = %r", name, value)
