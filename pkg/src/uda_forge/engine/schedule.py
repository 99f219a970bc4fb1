"""Learning-rate schedule: linear warmup, linear decay, layerwise encoder rates."""

from __future__ import annotations

from dataclasses import dataclass, replace

import torch

from ..errors import ConfigError
from ..models import SegmentationNetwork

ROLE_ENCODER = "encoder"
ROLE_HEAD = "head"


@dataclass(frozen=True)
class ScheduleConfig:
    base_lr_decoder: float = 1.4e-4
    base_lr_encoder: float = 1.4e-5
    layerwise_decay: float = 0.9
    warmup_iters: int = 1500
    total_iters: int = 40000
    batch_size: int = 8
    weight_decay: float = 0.01
    clip_norm: float = 1.0

    def validate(self) -> None:
        if not 0 < self.warmup_iters < self.total_iters:
            raise ConfigError(
                f"need 0 < warmup_iters < total_iters, got {self.warmup_iters}/{self.total_iters}"
            )
        if not 0.0 < self.layerwise_decay <= 1.0:
            raise ConfigError(f"layerwise_decay must lie in (0, 1], got {self.layerwise_decay}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")

    def without_lr_multiplier(self) -> "ScheduleConfig":
        """Encoder trains at the decoder rate; the ratio between them is the multiplier."""
        return replace(self, base_lr_encoder=self.base_lr_decoder)


@dataclass(frozen=True)
class GroupDescriptor:
    """Identifies one parameter group for rate lookup.

    Encoder blocks use ``block_index`` 0..n-1 (depth order); the patch/positional
    embeddings sit below block 0 at index -1. Head groups (adapter, decoder,
    projector) ignore the block fields.
    """

    name: str
    role: str
    block_index: int = 0
    num_blocks: int = 1


def base_lr(schedule: ScheduleConfig, group: GroupDescriptor) -> float:
    if group.role == ROLE_HEAD:
        return schedule.base_lr_decoder
    exponent = group.num_blocks - 1 - group.block_index
    return schedule.base_lr_encoder * schedule.layerwise_decay**exponent


def lr_at(schedule: ScheduleConfig, step: int, group: GroupDescriptor) -> float:
    """Linear warmup to the group's base rate, then linear decay to zero."""
    if not 0 <= step <= schedule.total_iters:
        raise ValueError(f"step {step} outside [0, {schedule.total_iters}]")
    if step < schedule.warmup_iters:
        factor = step / schedule.warmup_iters
    else:
        factor = (schedule.total_iters - step) / (schedule.total_iters - schedule.warmup_iters)
    return base_lr(schedule, group) * factor


def parameter_groups(net: SegmentationNetwork) -> list[tuple[GroupDescriptor, list[torch.nn.Parameter]]]:
    """Split network parameters into rate groups for the optimizer."""
    groups: list[tuple[GroupDescriptor, list[torch.nn.Parameter]]] = []
    n = len(net.encoder.blocks)
    if not net.config.encoder_frozen:
        embed = list(net.encoder.patch_embed.parameters()) + [net.encoder.pos_embed]
        groups.append((GroupDescriptor("encoder.embed", ROLE_ENCODER, -1, n), embed))
        for i, block in enumerate(net.encoder.blocks):
            groups.append(
                (GroupDescriptor(f"encoder.block{i}", ROLE_ENCODER, i, n), list(block.parameters()))
            )
        groups.append(
            (GroupDescriptor("encoder.norm", ROLE_ENCODER, n - 1, n), list(net.encoder.norm.parameters()))
        )
    for name, module in (("adapter", net.adapter), ("decoder", net.decoder), ("projector", net.projector)):
        groups.append((GroupDescriptor(name, ROLE_HEAD), list(module.parameters())))
    return groups


def build_optimizer(net: SegmentationNetwork, schedule: ScheduleConfig) -> torch.optim.AdamW:
    """AdamW over the rate groups; group descriptors ride along as plain keys."""
    param_groups = []
    for desc, params in parameter_groups(net):
        param_groups.append(
            {
                "params": params,
                "lr": 0.0,
                "name": desc.name,
                "role": desc.role,
                "block_index": desc.block_index,
                "num_blocks": desc.num_blocks,
            }
        )
    return torch.optim.AdamW(param_groups, lr=0.0, weight_decay=schedule.weight_decay)


def apply_learning_rates(optimizer: torch.optim.Optimizer, schedule: ScheduleConfig, step: int) -> None:
    for group in optimizer.param_groups:
        desc = GroupDescriptor(
            name=group["name"],
            role=group["role"],
            block_index=group["block_index"],
            num_blocks=group["num_blocks"],
        )
        group["lr"] = lr_at(schedule, step, desc)
