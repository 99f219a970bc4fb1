"""Cross-domain mixing: paste half of the source image's classes onto a target image."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class MixResult:
    """Composited training sample with exact pixel provenance.

    ``mask`` is 1 where a pixel (image, label, and weight alike) comes from the
    source sample and 0 where it comes from the target/pseudo side.
    """

    image: torch.Tensor  # (B, 3, H, W)
    label: torch.Tensor  # (B, H, W)
    weight: torch.Tensor  # (B, H, W) in [0, 1]
    mask: torch.Tensor  # (B, H, W) bool


def select_paste_classes(label: torch.Tensor, ignore_index: int, rng: np.random.Generator) -> torch.Tensor:
    """Uniformly pick ceil(K/2) of the K classes present in one label map."""
    present = torch.unique(label)
    present = present[present != ignore_index]
    if present.numel() == 0:
        raise ValueError("source label map has no labeled pixels")
    k = math.ceil(present.numel() / 2)
    chosen = rng.choice(present.numel(), size=k, replace=False)
    return present[torch.from_numpy(np.sort(chosen)).to(label.device)]


def dacs_mix(
    source_image: torch.Tensor,
    source_label: torch.Tensor,
    target_image: torch.Tensor,
    pseudo_label: torch.Tensor,
    pseudo_weight: torch.Tensor,
    ignore_index: int,
    rng: np.random.Generator,
) -> MixResult:
    """Batched class-mix; item i of the source batch is pasted onto item i of the target.

    Composition is by selection, never arithmetic, so every output pixel equals
    its parent bit-exactly. Source pixels carry weight 1 except ignore_index
    pixels inside the paste mask, which carry weight 0.
    """
    if source_image.shape != target_image.shape:
        raise ValueError(
            f"source {tuple(source_image.shape)} and target {tuple(target_image.shape)} differ"
        )
    masks = []
    for i in range(source_label.shape[0]):
        classes = select_paste_classes(source_label[i], ignore_index, rng)
        masks.append(torch.isin(source_label[i], classes))
    mask = torch.stack(masks)

    image = torch.where(mask.unsqueeze(1), source_image, target_image)
    label = torch.where(mask, source_label, pseudo_label)
    weight = torch.where(mask, torch.ones_like(pseudo_weight), pseudo_weight)
    weight = torch.where(mask & (source_label == ignore_index), torch.zeros_like(weight), weight)
    return MixResult(image=image, label=label, weight=weight, mask=mask)
