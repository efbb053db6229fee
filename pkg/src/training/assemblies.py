"""
Per-method loss assemblies and the forward/backward pass over a batch.

An assembly decides which samples form a training step (plain sample
batches, mixed samples or comparison groups), fetches their teacher outputs
through the oracle, and combines the method's losses. `forward_backward`
turns that combined loss into gradients over every trainable parameter.
"""

import abc
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import InvalidInput, NumericalDivergence
from src.losses.base_losses import KdConfig, LossOutput, ce_loss_batch, kd_loss_batch, total_loss
from src.losses.comparative import ckd_group_loss_batch, split_sizes
from src.losses.hint import HintRegressor, fitnets_hint_loss_batch
from src.losses.mixup import draw_mixup_weights, mixup_supervision_loss_batch, mixup_teacher_targets
from src.losses.relational import dist_loss, rkd_loss
from src.numerics.rng import RngStream
from src.sampler.group_sampler import GroupBatcher, SamplerConfig
from src.training.config import TrainConfig
from src.training.mlp import MlpModel
from src.training.run_inputs import RunInputs

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    """One optimizer step's worth of rows fed to the student."""
    x: np.ndarray                                  # (R, D)
    y: np.ndarray                                  # (R,) hard labels
    teacher_logits: Optional[np.ndarray] = None    # (R, C)
    teacher_hints: Optional[np.ndarray] = None     # (R, hint-D)
    soft_labels: Optional[np.ndarray] = None       # (R, C) mixed one-hot labels
    teacher_targets: Optional[np.ndarray] = None   # (R, C) recombined teacher distributions
    num_groups: int = 0                            # rows are num_groups x k, A members first


def _relabel(out: LossOutput, mapping: Dict[str, str]) -> LossOutput:
    return LossOutput(
        value=out.value,
        grad_student={mapping.get(k, k): v for k, v in out.grad_student.items()},
        extras=out.extras,
    )


def _named_total(parts: List[Tuple[str, LossOutput, float]]) -> LossOutput:
    active = [(out, w) for _, out, w in parts if w > 0]
    out = total_loss(active if active else [(parts[0][1], parts[0][2])])
    out.extras = {}
    for name, part, _ in parts:
        out.extras[name] = part.value
        out.extras.update({f"{name}.{key}": value for key, value in part.extras.items()})
    return out


class LossAssembly(abc.ABC):
    """
    Abstract base for the per-method training objective. Concrete assemblies
    set `method` and implement 'build_batch' and 'loss'.
    """
    method: str = "generic"
    needs_regressor: bool = False
    uses_teacher: bool = True

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.ce_weight, self.teacher_weight = cfg.loss_weights
        self.inputs: Optional[RunInputs] = None

    def prepare(self, inputs: RunInputs) -> None:
        if self.uses_teacher and inputs.oracle is None:
            raise InvalidInput(f"{self.method} needs a teacher oracle")
        self.inputs = inputs

    def start_epoch(self, epoch: int) -> None:
        pass

    def _sample_positions(self, rng: RngStream) -> np.ndarray:
        size = min(self.cfg.batch_size, self.inputs.n)
        return np.sort(rng.choice(self.inputs.n, size, replace=False))

    def _plain_batch(self, positions: np.ndarray, want_hint: bool = False) -> Batch:
        x = self.inputs.x_train[positions]
        ids = self.inputs.train_ids[positions]
        logits, hints = None, None
        if self.uses_teacher:
            logits, hints = self.inputs.oracle.query_batch(ids, x, want_hint=want_hint)
        return Batch(x=x, y=self.inputs.y_train[positions], teacher_logits=logits, teacher_hints=hints)

    def build_batch(self, rng: RngStream) -> Batch:
        return self._plain_batch(self._sample_positions(rng))

    @abc.abstractmethod
    def loss(self, logits: np.ndarray, features: Optional[np.ndarray], batch: Batch,
             regressor: Optional[HintRegressor], rng: RngStream) -> LossOutput:
        """
        Combined objective for one batch.

        Returns:
            LossOutput with gradients keyed "logits", and for white-box
            methods also "features", "reg_W" and "reg_b".
        """

    def _ce(self, logits: np.ndarray, batch: Batch) -> LossOutput:
        return ce_loss_batch(logits, batch.y)


class CeOnlyAssembly(LossAssembly):
    method = "CE-only"
    uses_teacher = False

    def loss(self, logits, features, batch, regressor, rng):
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight)])


class KdAssembly(LossAssembly):
    method = "KD"

    def loss(self, logits, features, batch, regressor, rng):
        kd = kd_loss_batch(logits, batch.teacher_logits, self.cfg.kd)
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight),
                             ("kd", kd, self.teacher_weight)])


class RkdAssembly(LossAssembly):
    method = "RKD"

    def loss(self, logits, features, batch, regressor, rng):
        rkd_cfg = self.cfg.rkd
        rkd = rkd_loss(logits, batch.teacher_logits, rkd_cfg.w_dist, rkd_cfg.w_angle, rkd_cfg.delta)
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight),
                             ("rkd", _relabel(rkd, {"Zh": "logits"}), self.teacher_weight)])


class DistAssembly(LossAssembly):
    method = "DIST"

    def loss(self, logits, features, batch, regressor, rng):
        dist_cfg = self.cfg.dist
        dist = dist_loss(logits, batch.teacher_logits, KdConfig(temperature=dist_cfg.temperature),
                         dist_cfg.w_inter, dist_cfg.w_intra)
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight),
                             ("dist", _relabel(dist, {"Zh": "logits"}), self.teacher_weight)])


class MixupFixedAssembly(LossAssembly):
    """
    Mixes each batch row with partners drawn by in-batch shuffles. Supervision
    is recombined from the cached teacher outputs of the unmixed rows.
    """
    method = "MixupFixed"

    def build_batch(self, rng: RngStream) -> Batch:
        mix = self.cfg.mixup
        base = self._plain_batch(self._sample_positions(rng))
        size = base.x.shape[0]
        orders = [np.arange(size)] + [rng.permutation(size) for _ in range(mix.num_samples - 1)]
        weights = draw_mixup_weights(rng, mix.num_samples)

        x_mix = sum(w * base.x[order] for w, order in zip(weights, orders))
        onehot = np.eye(self.inputs.num_classes)[base.y]
        soft = sum(w * onehot[order] for w, order in zip(weights, orders))
        stacked = np.stack([base.teacher_logits[order] for order in orders])
        targets = mixup_teacher_targets(stacked, weights, mix)
        return Batch(x=x_mix, y=base.y, teacher_logits=base.teacher_logits,
                     soft_labels=soft, teacher_targets=targets)

    def loss(self, logits, features, batch, regressor, rng):
        return mixup_supervision_loss_batch(logits, batch.soft_labels, batch.teacher_targets,
                                            self.cfg.mixup, self.ce_weight, self.teacher_weight)


class _GroupBatchMixin:
    """Shared group-batch construction for the comparative methods."""

    def _setup_groups(self, inputs: RunInputs) -> None:
        sampler_cfg = SamplerConfig(k=self.cfg.ckd.k, cap=self.cfg.sampler_cap, seed=inputs.seed)
        self.batcher = GroupBatcher(np.arange(inputs.n), sampler_cfg,
                                    resample_each_epoch=self.cfg.resample_groups_each_epoch)

    def _group_batch(self, want_hint: bool) -> Batch:
        groups = self.batcher.next_batch(self.cfg.batch_size)
        positions = np.array([p for g in groups for p in g.group_a + g.group_b], dtype=np.int64)
        batch = self._plain_batch(positions, want_hint=want_hint)
        batch.num_groups = len(groups)
        return batch

    def _ckd_rows(self, student: np.ndarray, teacher: np.ndarray, num_groups: int,
                  rng: RngStream) -> LossOutput:
        """CKD over row blocks; gradient returned under "rows" with the input's shape."""
        k = self.cfg.ckd.k
        size_a, _ = split_sizes(k)
        s = student.reshape(num_groups, k, -1)
        t = teacher.reshape(num_groups, k, -1)
        out = ckd_group_loss_batch(s[:, :size_a], s[:, size_a:], t[:, :size_a], t[:, size_a:],
                                   self.cfg.ckd, rng=rng)
        grad = np.concatenate([out.grad_student["A"], out.grad_student["B"]], axis=1)
        return LossOutput(value=out.value, grad_student={"rows": grad.reshape(student.shape)},
                          extras=out.extras)


class CkdAssembly(_GroupBatchMixin, LossAssembly):
    """Cross-entropy on every group member plus beta times the comparative loss."""
    method = "CKD"

    def prepare(self, inputs: RunInputs) -> None:
        super().prepare(inputs)
        self._setup_groups(inputs)

    def start_epoch(self, epoch: int) -> None:
        self.batcher.start_epoch(epoch)

    def build_batch(self, rng: RngStream) -> Batch:
        return self._group_batch(want_hint=False)

    def loss(self, logits, features, batch, regressor, rng):
        ckd = self._ckd_rows(logits, batch.teacher_logits, batch.num_groups, rng)
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight),
                             ("ckd", _relabel(ckd, {"rows": "logits"}), self.cfg.ckd.beta)])


class FitNetsAssembly(LossAssembly):
    method = "FitNets"
    needs_regressor = True

    def build_batch(self, rng: RngStream) -> Batch:
        return self._plain_batch(self._sample_positions(rng), want_hint=True)

    def _hint(self, features, batch, regressor) -> LossOutput:
        if features is None or regressor is None:
            raise InvalidInput("FitNets needs student features and a hint regressor")
        return fitnets_hint_loss_batch(features, batch.teacher_hints, regressor)

    def loss(self, logits, features, batch, regressor, rng):
        parts = [("ce", self._ce(logits, batch), self.ce_weight),
                 ("hint", self._hint(features, batch, regressor), self.cfg.hint.weight)]
        if self.teacher_weight > 0:
            parts.append(("kd", kd_loss_batch(logits, batch.teacher_logits, self.cfg.kd), self.teacher_weight))
        return _named_total(parts)


class FitNetsCkdAssembly(_GroupBatchMixin, FitNetsAssembly):
    """FitNets on every group member plus CKD between regressed student features and teacher hints."""
    method = "FitNets+CKD"

    def prepare(self, inputs: RunInputs) -> None:
        super().prepare(inputs)
        self._setup_groups(inputs)

    def start_epoch(self, epoch: int) -> None:
        self.batcher.start_epoch(epoch)

    def build_batch(self, rng: RngStream) -> Batch:
        return self._group_batch(want_hint=True)

    def loss(self, logits, features, batch, regressor, rng):
        hint = self._hint(features, batch, regressor)
        regressed = regressor(features)
        ckd = self._ckd_rows(regressed, batch.teacher_hints, batch.num_groups, rng)
        ckd_grads = regressor.backward(features, ckd.grad_student["rows"])
        ckd = LossOutput(value=ckd.value, grad_student=ckd_grads, extras=ckd.extras)
        return _named_total([("ce", self._ce(logits, batch), self.ce_weight),
                             ("hint", hint, self.cfg.hint.weight),
                             ("ckd", ckd, self.cfg.ckd.beta)])


ASSEMBLIES = {cls.method: cls for cls in (
    CeOnlyAssembly, KdAssembly, CkdAssembly, RkdAssembly, DistAssembly,
    MixupFixedAssembly, FitNetsAssembly, FitNetsCkdAssembly,
)}


def build_assembly(cfg: TrainConfig) -> LossAssembly:
    return ASSEMBLIES[cfg.method](cfg)


def forward_backward(model: MlpModel, batch: Batch, assembly: LossAssembly,
                     regressor: Optional[HintRegressor] = None,
                     rng: Optional[RngStream] = None) -> LossOutput:
    """
    Loss value and gradients over every model parameter ("W0", "b0", ...) and,
    for white-box methods, the regressor ("reg_W", "reg_b").

    Raises:
        NumericalDivergence: non-finite activations, loss or gradients.
    """
    if batch.x.ndim != 2 or batch.x.shape[1] != model.input_dim:
        raise InvalidInput(f"Batch features {batch.x.shape} do not match the model input {model.input_dim}")
    cache = model.forward(batch.x)
    out = assembly.loss(cache.logits, cache.hint, batch, regressor, rng)
    if not np.isfinite(out.value):
        raise NumericalDivergence(f"{assembly.method} loss became non-finite")

    grads = model.backward(cache, out.grad_student.get("logits"), out.grad_student.get("features"))
    for name in ("reg_W", "reg_b"):
        if name in out.grad_student:
            grads[name] = out.grad_student[name]
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise NumericalDivergence(f"Non-finite gradient for parameter '{name}'")
    return LossOutput(value=out.value, grad_student=grads, extras=out.extras)
