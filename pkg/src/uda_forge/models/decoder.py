"""Pyramid decoder: coarse-to-fine upsampling with aggressively shrinking widths.

Each stage doubles resolution with nearest-neighbor upsampling, refines with a
3x3 conv + BatchNorm + ReLU at a strictly smaller channel width, then adds the
pointwise-matched skip level. A 1x1 classifier and a 4x bilinear upsample bring
the stride-4 features to full resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError


@dataclass(frozen=True)
class PyramidDecoderConfig:
    channel_schedule: tuple[int, int, int, int] = (256, 128, 64, 32)
    num_classes: int = 6

    def validate(self) -> None:
        if len(self.channel_schedule) != 4:
            raise ConfigError(
                f"channel_schedule must list 4 widths (strides 32->4), got {self.channel_schedule}"
            )
        if any(a <= b for a, b in zip(self.channel_schedule, self.channel_schedule[1:])):
            raise ConfigError(
                f"channel widths must strictly decrease toward full resolution: {self.channel_schedule}"
            )
        if self.num_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.num_classes}")


class PyramidStage(nn.Module):
    def __init__(self, cin: int, cout: int, skip_channels: int):
        super().__init__()
        self.conv = nn.Conv2d(cin, cout, kernel_size=3, padding=1)
        self.bn = nn.BatchNorm2d(cout)
        self.skip = nn.Conv2d(skip_channels, cout, kernel_size=1)

    def forward(self, x: torch.Tensor, skip: torch.Tensor) -> torch.Tensor:
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        x = F.relu(self.bn(self.conv(x)), inplace=True)
        return x + self.skip(skip)


class BasicPyramid(nn.Module):
    """Decode four feature levels (strides 4/8/16/32) into full-resolution logits."""

    def __init__(self, config: PyramidDecoderConfig, in_channels: int):
        super().__init__()
        config.validate()
        self.config = config
        widths = config.channel_schedule
        self.entry = nn.Conv2d(in_channels, widths[0], kernel_size=1)
        self.stages = nn.ModuleList(
            PyramidStage(widths[i], widths[i + 1], in_channels) for i in range(3)
        )
        self.classifier = nn.Conv2d(widths[3], config.num_classes, kernel_size=1)

    def forward(self, levels: list[torch.Tensor]) -> torch.Tensor:
        if len(levels) != 4:
            raise ConfigError(f"expected 4 feature levels, got {len(levels)}")
        x = self.entry(levels[3])
        for stage, skip in zip(self.stages, (levels[2], levels[1], levels[0])):
            x = stage(x, skip)
        logits = self.classifier(x)
        return F.interpolate(logits, scale_factor=4, mode="bilinear", align_corners=False)
