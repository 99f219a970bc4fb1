"""Pseudo-label generation with horizontal-flip aggregation and confidence weighting."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn


@dataclass(frozen=True)
class PseudoLabelBatch:
    """Hard labels with a per-image confidence weight.

    ``q`` is the fraction of pixels whose aggregated max-softmax reaches the
    acceptance threshold; it broadcasts to a per-pixel weight map.
    """

    labels: torch.Tensor  # (B, H, W) int64
    q: torch.Tensor  # (B,) float
    confidence: torch.Tensor  # (B, H, W) max-softmax

    def weight_map(self) -> torch.Tensor:
        return self.q.view(-1, 1, 1).expand_as(self.confidence)


def argmax_lowest(scores: torch.Tensor, dim: int) -> torch.Tensor:
    """Argmax breaking ties toward the lowest index, deterministically."""
    max_vals = scores.max(dim=dim, keepdim=True).values
    num = scores.shape[dim]
    shape = [1] * scores.ndim
    shape[dim] = num
    idx = torch.arange(num, device=scores.device).view(shape)
    candidates = torch.where(scores == max_vals, idx, torch.full_like(idx, num))
    return candidates.min(dim=dim).values


def aggregated_probabilities(
    net: nn.Module, images: torch.Tensor, flip_aggregation: bool = True
) -> torch.Tensor:
    """Softmax of net(images), averaged with the un-flipped prediction of the
    horizontally flipped input when flip aggregation is on."""
    logits, _ = net(images)
    probs = logits.softmax(dim=1)
    if flip_aggregation:
        flipped_logits, _ = net(torch.flip(images, dims=[-1]))
        probs = 0.5 * (probs + torch.flip(flipped_logits.softmax(dim=1), dims=[-1]))
    return probs


@torch.no_grad()
def generate_pseudo_labels(
    teacher: nn.Module,
    target_images: torch.Tensor,
    tau: float,
    flip_aggregation: bool = True,
) -> PseudoLabelBatch:
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {tau}")
    was_training = teacher.training
    teacher.eval()
    try:
        probs = aggregated_probabilities(teacher, target_images, flip_aggregation)
    finally:
        teacher.train(was_training)
    confidence, _ = probs.max(dim=1)
    labels = argmax_lowest(probs, dim=1)
    q = (confidence >= tau).to(probs.dtype).mean(dim=(1, 2))
    return PseudoLabelBatch(labels=labels, q=q, confidence=confidence)
