"""Full segmentation network: encoder -> multi-scale adapter -> pyramid decoder,
plus the pointwise projector used for feature alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError
from .adapter import STRIDES, MultiScaleAdapter
from .decoder import BasicPyramid, PyramidDecoderConfig
from .encoder import EncoderConfig, TokenEncoder

TOY_ENCODER = "toy-transformer"
EXTERNAL_ENCODER = "external-pretrained"


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: PyramidDecoderConfig = field(default_factory=PyramidDecoderConfig)
    adapter_channels: int = 64
    use_spatial_prior: bool = True
    projector_dim: int = 256
    projector_layers: int = 1
    encoder_kind: str = TOY_ENCODER
    encoder_checkpoint: str | None = None  # external-pretrained only
    encoder_frozen: bool = False

    def validate(self) -> None:
        self.encoder.validate()
        self.decoder.validate()
        if self.projector_layers not in (1, 2):
            raise ConfigError(f"projector_layers must be 1 or 2, got {self.projector_layers}")
        if self.encoder_kind not in (TOY_ENCODER, EXTERNAL_ENCODER):
            raise ConfigError(f"unknown encoder kind '{self.encoder_kind}'")
        if self.encoder_kind == EXTERNAL_ENCODER and not self.encoder_checkpoint:
            raise ConfigError("external-pretrained encoder needs encoder_checkpoint")

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder.__dict__ | {},
            "decoder": {
                "channel_schedule": list(self.decoder.channel_schedule),
                "num_classes": self.decoder.num_classes,
            },
            "adapter_channels": self.adapter_channels,
            "use_spatial_prior": self.use_spatial_prior,
            "projector_dim": self.projector_dim,
            "projector_layers": self.projector_layers,
            "encoder_kind": self.encoder_kind,
            "encoder_checkpoint": self.encoder_checkpoint,
            "encoder_frozen": self.encoder_frozen,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            encoder=EncoderConfig(**d["encoder"]),
            decoder=PyramidDecoderConfig(
                channel_schedule=tuple(d["decoder"]["channel_schedule"]),
                num_classes=d["decoder"]["num_classes"],
            ),
            adapter_channels=d["adapter_channels"],
            use_spatial_prior=d["use_spatial_prior"],
            projector_dim=d["projector_dim"],
            projector_layers=d["projector_layers"],
            encoder_kind=d["encoder_kind"],
            encoder_checkpoint=d.get("encoder_checkpoint"),
            encoder_frozen=d.get("encoder_frozen", False),
        )


def _build_projector(token_dim: int, out_dim: int, layers: int) -> nn.Module:
    if layers == 1:
        return nn.Conv2d(token_dim, out_dim, kernel_size=1)
    return nn.Sequential(
        nn.Conv2d(token_dim, token_dim, kernel_size=1),
        nn.GELU(),
        nn.Conv2d(token_dim, out_dim, kernel_size=1),
    )


class SegmentationNetwork(nn.Module):
    """Composes the pipeline and owns the padding policy.

    Inputs of any size are reflection-padded up to the least common multiple of
    the patch size and the deepest feature stride; logits are cropped back, so
    callers see exactly H x W x C.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.encoder = TokenEncoder(config.encoder)
        if config.encoder_kind == EXTERNAL_ENCODER:
            payload = torch.load(config.encoder_checkpoint, map_location="cpu", weights_only=True)
            self.encoder.load_state_dict(payload["state"])
        if config.encoder_frozen:
            self.encoder.requires_grad_(False)
        self.adapter = MultiScaleAdapter(
            token_dim=config.encoder.embed_dim,
            channels=config.adapter_channels,
            use_spatial_prior=config.use_spatial_prior,
        )
        self.decoder = BasicPyramid(config.decoder, in_channels=config.adapter_channels)
        self.projector = _build_projector(
            config.encoder.embed_dim, config.projector_dim, config.projector_layers
        )
        self.pad_multiple = math.lcm(config.encoder.patch_size, STRIDES[-1])

    @property
    def num_classes(self) -> int:
        return self.config.decoder.num_classes

    def _pad(self, images: torch.Tensor) -> tuple[torch.Tensor, int, int]:
        h, w = images.shape[-2:]
        m = self.pad_multiple
        ph = (m - h % m) % m
        pw = (m - w % m) % m
        if ph or pw:
            images = F.pad(images, (0, pw, 0, ph), mode="reflect")
        return images, h, w

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return (logits cropped to the input size, token grid of the padded input)."""
        padded, h, w = self._pad(images)
        tokens = self.encoder(padded)
        levels = self.adapter(tokens, padded)
        logits = self.decoder(levels)
        return logits[..., :h, :w], tokens

    def forward_tokens(self, images: torch.Tensor) -> torch.Tensor:
        padded, _, _ = self._pad(images)
        return self.encoder(padded)

    def project(self, tokens: torch.Tensor) -> torch.Tensor:
        return self.projector(tokens)

    def head_modules(self) -> list[nn.Module]:
        return [self.adapter, self.decoder, self.projector]

    def parameter_counts(self) -> dict[str, int]:
        return {
            name: sum(p.numel() for p in module.parameters())
            for name, module in (
                ("encoder", self.encoder),
                ("adapter", self.adapter),
                ("decoder", self.decoder),
                ("projector", self.projector),
            )
        }


def build_network(config: ModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> SegmentationNetwork:
    """Deterministic construction: same (config, seed, dtype) -> identical weights."""
    torch.manual_seed(seed)
    net = SegmentationNetwork(config)
    return net.to(dtype)


def save_checkpoint(path: str | Path, net: SegmentationNetwork, **extra) -> None:
    payload = {"model_config": net.config.to_dict(), "state": net.state_dict()}
    payload.update(extra)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[SegmentationNetwork, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    config = ModelConfig.from_dict(payload["model_config"])
    # External weights were materialized into the checkpoint; rebuild plain.
    if config.encoder_kind == EXTERNAL_ENCODER:
        config = ModelConfig.from_dict(config.to_dict() | {"encoder_kind": TOY_ENCODER, "encoder_checkpoint": None})
    net = SegmentationNetwork(config)
    net.load_state_dict(payload["state"])
    extra = {k: v for k, v in payload.items() if k not in ("model_config", "state")}
    return net, extra


def save_encoder_checkpoint(path: str | Path, encoder: TokenEncoder) -> None:
    """Write a standalone token-encoder archive loadable as an external encoder."""
    torch.save({"encoder_config": encoder.config.__dict__ | {}, "state": encoder.state_dict()}, path)
