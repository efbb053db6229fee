from src.losses.base_losses import (
    KdConfig, LossOutput, ce_loss, ce_loss_batch, kd_loss, kd_loss_batch,
    kd_target_loss_batch, soft_ce_loss_batch, total_loss,
)
from src.losses.comparative import (
    CkdConfig, ckd_group_loss, ckd_group_loss_batch, ckd_on_features, ckd_pair_loss, split_sizes,
)
from src.losses.hint import HintConfig, HintRegressor, fitnets_hint_loss, fitnets_hint_loss_batch
from src.losses.mixup import (
    MixupConfig, draw_mixup_weights, mixup_fixed_group, mixup_fixed_pair,
    mixup_supervision_loss_batch, mixup_teacher_targets,
)
from src.losses.relational import DistConfig, RkdConfig, dist_loss, rkd_loss
