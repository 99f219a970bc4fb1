"""Frozen reference feature extractor for the feature-distance loss.

At full scale this wraps an externally supplied pretrained token encoder. In
toy mode it is a randomly initialized encoder built from a fixed seed, so every
run in a comparison aligns against the identical frozen checkpoint without any
external weights.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..models import EncoderConfig, TokenEncoder


class FrozenReference(nn.Module):
    def __init__(self, encoder: TokenEncoder, pad_multiple: int):
        super().__init__()
        self.encoder = encoder
        self.pad_multiple = pad_multiple
        self.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True) -> "FrozenReference":
        return super().train(False)  # permanently frozen in eval mode

    @torch.no_grad()
    def forward_tokens(self, images: torch.Tensor) -> torch.Tensor:
        h, w = images.shape[-2:]
        m = self.pad_multiple
        ph, pw = (m - h % m) % m, (m - w % m) % m
        if ph or pw:
            images = F.pad(images, (0, pw, 0, ph), mode="reflect")
        return self.encoder(images)


def build_toy_reference(
    patch_size: int,
    embed_dim: int,
    depth: int,
    num_heads: int,
    seed: int,
    pad_multiple: int,
    dtype: torch.dtype = torch.float32,
) -> FrozenReference:
    torch.manual_seed(seed)
    encoder = TokenEncoder(
        EncoderConfig(patch_size=patch_size, embed_dim=embed_dim, depth=depth, num_heads=num_heads)
    )
    return FrozenReference(encoder.to(dtype), pad_multiple)


def load_external_reference(
    checkpoint: str, pad_multiple: int, dtype: torch.dtype = torch.float32
) -> FrozenReference:
    payload = torch.load(checkpoint, map_location="cpu", weights_only=True)
    encoder = TokenEncoder(EncoderConfig(**payload["encoder_config"]))
    encoder.load_state_dict(payload["state"])
    return FrozenReference(encoder.to(dtype), pad_multiple)
