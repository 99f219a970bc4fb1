"""Patch masking for consistency training on occluded target views."""

from __future__ import annotations

import numpy as np
import torch


def mask_image(
    images: torch.Tensor, patch: int, ratio: float, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Zero each patch independently with probability ``ratio``.

    Returns (masked images, keep grid); the grid has one cell per patch and is
    1 where the patch was kept. Image sizes that are not patch multiples are
    covered by a ceil-sized grid cropped back to H x W.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1], got {ratio}")
    if patch < 1:
        raise ValueError(f"patch must be positive, got {patch}")
    b, _, h, w = images.shape
    gh, gw = -(-h // patch), -(-w // patch)
    keep = rng.random(size=(b, gh, gw)) >= ratio
    keep_t = torch.from_numpy(keep).to(device=images.device)
    full = keep_t.repeat_interleave(patch, dim=1).repeat_interleave(patch, dim=2)[:, :h, :w]
    masked = images * full.unsqueeze(1).to(images.dtype)
    return masked, keep_t
