"""One optimization step of the adaptation recipe.

Order of operations: source cross-entropy, teacher pseudo-labels on the target
batch, cross-domain mix loss, masked-view consistency loss, feature-distance
terms on source and target tokens, then backward, clipped update, and the EMA
teacher refresh. Every stochastic choice draws from a (seed, step, lane) stream
so components can be toggled without perturbing one another.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import NumericAbort
from ..models import SegmentationNetwork
from ..seeding import LANE_MASK, LANE_MIX, step_rng
from .dacs import dacs_mix
from .ema import EmaTeacher
from .losses import feature_distance_loss, weighted_cross_entropy
from .masking import mask_image
from .pseudo import generate_pseudo_labels
from .reference import FrozenReference
from .schedule import ScheduleConfig, apply_learning_rates


@dataclass(frozen=True)
class Toggles:
    """Ablation switches for the training strategies."""

    ema: bool = True
    pseudo_weight: bool = True
    lr_multiplier: bool = True
    dacs: bool = True
    rcs: bool = True
    mic: bool = True
    fd_loss: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class UdaConstants:
    tau: float = 0.968
    mask_ratio: float = 0.7
    mask_patch: int = 16
    alpha: float = 0.999
    rcs_temperature: float = 0.01
    lambda_fd: float = 0.5
    lambda_mask: float = 1.0
    flip_pseudo: bool = True
    fd_form: str = "cosine"
    mask_mixed_input: bool = False  # mask the mixed image instead of the raw target


@dataclass(frozen=True)
class LossReport:
    """Per-step loss components; disabled components are absent, not zero.

    ``total`` recomposes the component floats in a fixed order, so component
    algebra on reports is exact.
    """

    step: int
    total: float
    ce_source: float | None = None
    ce_mixed: float | None = None
    ce_masked: float | None = None
    fd_source: float | None = None
    fd_target: float | None = None
    q_mean: float | None = None

    def to_dict(self) -> dict:
        out = {"step": self.step, "total": self.total}
        for key in ("ce_source", "ce_mixed", "ce_masked", "fd_source", "fd_target", "q_mean"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


def effective_schedule(schedule: ScheduleConfig, toggles: Toggles) -> ScheduleConfig:
    return schedule if toggles.lr_multiplier else schedule.without_lr_multiplier()


def compose_total(
    ce_source: float,
    ce_mixed: float | None,
    ce_masked: float | None,
    fd_source: float | None,
    fd_target: float | None,
    constants: UdaConstants,
) -> float:
    total = ce_source
    if ce_mixed is not None:
        total = total + ce_mixed
    if ce_masked is not None:
        total = total + constants.lambda_mask * ce_masked
    fd_terms = [v for v in (fd_source, fd_target) if v is not None]
    if fd_terms:
        total = total + constants.lambda_fd * sum(fd_terms)
    return total


def train_step(
    student: SegmentationNetwork,
    teacher: EmaTeacher | None,
    reference: FrozenReference | None,
    optimizer: torch.optim.Optimizer,
    schedule: ScheduleConfig,
    toggles: Toggles,
    constants: UdaConstants,
    step: int,
    seed: int,
    source_images: torch.Tensor,
    source_labels: torch.Tensor,
    target_images: torch.Tensor | None,
    ignore_index: int,
) -> LossReport:
    apply_learning_rates(optimizer, effective_schedule(schedule, toggles), step)
    optimizer.zero_grad(set_to_none=True)
    student.train()

    logits_source, tokens_source = student(source_images)
    ce_source = weighted_cross_entropy(logits_source, source_labels, None, ignore_index)

    pseudo = None
    weight_map = None
    mix = None
    need_pseudo = target_images is not None and (toggles.dacs or toggles.mic)
    if need_pseudo:
        if teacher is None:
            raise ValueError("pseudo-label streams enabled but no teacher was provided")
        if not toggles.ema:
            teacher.copy_from(student)
        pseudo = generate_pseudo_labels(
            teacher.net, target_images, constants.tau, constants.flip_pseudo
        )
        if toggles.pseudo_weight:
            weight_map = pseudo.weight_map()
        else:
            weight_map = torch.ones_like(pseudo.confidence)

    ce_mixed = None
    if toggles.dacs and pseudo is not None:
        mix = dacs_mix(
            source_images,
            source_labels,
            target_images,
            pseudo.labels,
            weight_map,
            ignore_index,
            step_rng(seed, step, LANE_MIX),
        )
        logits_mixed, _ = student(mix.image)
        ce_mixed = weighted_cross_entropy(logits_mixed, mix.label, mix.weight, ignore_index)

    ce_masked = None
    if toggles.mic and pseudo is not None:
        if constants.mask_mixed_input and mix is not None:
            base_images, base_labels, base_weight = mix.image, mix.label, mix.weight
        else:
            base_images, base_labels, base_weight = target_images, pseudo.labels, weight_map
        masked_images, _ = mask_image(
            base_images, constants.mask_patch, constants.mask_ratio, step_rng(seed, step, LANE_MASK)
        )
        logits_masked, _ = student(masked_images)
        ce_masked = weighted_cross_entropy(logits_masked, base_labels, base_weight, ignore_index)

    fd_source = None
    fd_target = None
    if toggles.fd_loss:
        if reference is None:
            raise ValueError("feature-distance loss enabled but no reference extractor was provided")
        ref_source = reference.forward_tokens(source_images)
        fd_source = feature_distance_loss(
            student.project(tokens_source), ref_source, constants.fd_form
        )
        if target_images is not None:
            tokens_target = student.forward_tokens(target_images)
            ref_target = reference.forward_tokens(target_images)
            fd_target = feature_distance_loss(
                student.project(tokens_target), ref_target, constants.fd_form
            )

    components = {
        "ce_source": ce_source,
        "ce_mixed": ce_mixed,
        "ce_masked": ce_masked,
        "fd_source": fd_source,
        "fd_target": fd_target,
    }
    for name, value in components.items():
        if value is not None and not torch.isfinite(value):
            raise NumericAbort(name, step)

    total = ce_source
    if ce_mixed is not None:
        total = total + ce_mixed
    if ce_masked is not None:
        total = total + constants.lambda_mask * ce_masked
    if fd_source is not None:
        fd_sum = fd_source if fd_target is None else fd_source + fd_target
        total = total + constants.lambda_fd * fd_sum

    total.backward()
    torch.nn.utils.clip_grad_norm_(student.parameters(), schedule.clip_norm)
    optimizer.step()
    if teacher is not None and toggles.ema:
        teacher.update(student)

    floats = {k: (None if v is None else float(v.detach())) for k, v in components.items()}
    return LossReport(
        step=step,
        total=compose_total(
            floats["ce_source"],
            floats["ce_mixed"],
            floats["ce_masked"],
            floats["fd_source"],
            floats["fd_target"],
            constants,
        ),
        q_mean=None if pseudo is None else float(pseudo.q.mean()),
        **floats,
    )
