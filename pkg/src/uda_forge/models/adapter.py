"""Multi-scale adapter: convolutional spatial priors fused with resampled tokens.

A stand-in for heavier token-to-pyramid adapters: a strided conv stem reads the
raw image into features at strides 4/8/16/32, and each level adds a pointwise
projection of the (bilinearly resampled) encoder tokens. Zeroing the prior
projections collapses every level to pure resampled token features, which is
the single-scale ablation hook.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

STRIDES = (4, 8, 16, 32)


def _conv_bn_relu(cin: int, cout: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, kernel_size=3, stride=stride, padding=1),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class MultiScaleAdapter(nn.Module):
    def __init__(self, token_dim: int, channels: int = 64, use_spatial_prior: bool = True):
        super().__init__()
        self.channels = channels
        self.use_spatial_prior = use_spatial_prior
        if use_spatial_prior:
            self.stem = nn.Sequential(
                _conv_bn_relu(3, channels // 2, stride=2),
                _conv_bn_relu(channels // 2, channels, stride=2),
            )
            self.downs = nn.ModuleList(_conv_bn_relu(channels, channels, stride=2) for _ in range(3))
            self.prior_projs = nn.ModuleList(nn.Conv2d(channels, channels, 1) for _ in STRIDES)
        self.token_projs = nn.ModuleList(nn.Conv2d(token_dim, channels, 1) for _ in STRIDES)

    def forward(self, tokens: torch.Tensor, images: torch.Tensor) -> list[torch.Tensor]:
        h, w = images.shape[-2:]
        if h % STRIDES[-1] or w % STRIDES[-1]:
            raise ValueError(f"input {h}x{w} not divisible by max stride {STRIDES[-1]}")
        priors = None
        if self.use_spatial_prior:
            priors = []
            x = self.stem(images)
            priors.append(x)
            for down in self.downs:
                x = down(x)
                priors.append(x)

        levels = []
        for i, stride in enumerate(STRIDES):
            size = (h // stride, w // stride)
            level = F.interpolate(tokens, size=size, mode="bilinear", align_corners=False)
            level = self.token_projs[i](level)
            if priors is not None:
                level = level + self.prior_projs[i](priors[i])
            levels.append(level)
        return levels

    @torch.no_grad()
    def zero_prior_fusion(self) -> None:
        """Zero the prior fusion so levels carry only resampled token features."""
        if not self.use_spatial_prior:
            return
        for proj in self.prior_projs:
            proj.weight.zero_()
            proj.bias.zero_()
