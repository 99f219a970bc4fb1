from .dacs import MixResult, dacs_mix, select_paste_classes
from .ema import EmaTeacher, ema_update
from .losses import feature_distance_loss, weighted_cross_entropy
from .masking import mask_image
from .pseudo import PseudoLabelBatch, aggregated_probabilities, argmax_lowest, generate_pseudo_labels
from .reference import FrozenReference, build_toy_reference, load_external_reference
from .schedule import (
    ROLE_ENCODER,
    ROLE_HEAD,
    GroupDescriptor,
    ScheduleConfig,
    apply_learning_rates,
    base_lr,
    build_optimizer,
    lr_at,
    parameter_groups,
)
from .trainer import LossReport, Toggles, UdaConstants, compose_total, effective_schedule, train_step

__all__ = [
    "MixResult",
    "dacs_mix",
    "select_paste_classes",
    "EmaTeacher",
    "ema_update",
    "feature_distance_loss",
    "weighted_cross_entropy",
    "mask_image",
    "PseudoLabelBatch",
    "aggregated_probabilities",
    "argmax_lowest",
    "generate_pseudo_labels",
    "FrozenReference",
    "build_toy_reference",
    "load_external_reference",
    "ROLE_ENCODER",
    "ROLE_HEAD",
    "GroupDescriptor",
    "ScheduleConfig",
    "apply_learning_rates",
    "base_lr",
    "build_optimizer",
    "lr_at",
    "parameter_groups",
    "LossReport",
    "Toggles",
    "UdaConstants",
    "compose_total",
    "effective_schedule",
    "train_step",
]
