"""Loss terms: per-pixel weighted cross-entropy and token feature alignment."""

from __future__ import annotations

import torch
import torch.nn.functional as F

FD_EPS = 1e-8


def weighted_cross_entropy(
    logits: torch.Tensor,
    labels: torch.Tensor,
    weight: torch.Tensor | None,
    ignore_index: int,
) -> torch.Tensor:
    """Mean over non-ignored pixels of weight * CE.

    The denominator counts valid pixels regardless of their weight, so an
    all-zero weight map yields exactly zero loss and zero gradients.
    """
    per_pixel = F.cross_entropy(logits, labels, reduction="none", ignore_index=ignore_index)
    if weight is not None:
        per_pixel = per_pixel * weight
    valid = (labels != ignore_index).sum().clamp(min=1)
    return per_pixel.sum() / valid.to(per_pixel.dtype)


def feature_distance_loss(
    student_proj: torch.Tensor,
    teacher_feats: torch.Tensor,
    form: str = "cosine",
) -> torch.Tensor:
    """Mean over grid positions of (1 - cosine similarity) between feature pairs.

    Norms are clamped at FD_EPS so zero vectors contribute a finite term instead
    of raising. The optional "cosine_smooth_l1" form adds a smooth-L1 penalty on
    the L2-normalized features, a hook for richer distillation mixes.
    """
    if student_proj.shape != teacher_feats.shape:
        raise ValueError(
            f"feature grids differ: {tuple(student_proj.shape)} vs {tuple(teacher_feats.shape)}"
        )
    s_norm = student_proj.norm(dim=1).clamp_min(FD_EPS)
    t_norm = teacher_feats.norm(dim=1).clamp_min(FD_EPS)
    cosine = (student_proj * teacher_feats).sum(dim=1) / (s_norm * t_norm)
    loss = (1.0 - cosine).mean()
    if form == "cosine":
        return loss
    if form == "cosine_smooth_l1":
        s_unit = student_proj / s_norm.unsqueeze(1)
        t_unit = teacher_feats / t_norm.unsqueeze(1)
        return loss + 0.5 * F.smooth_l1_loss(s_unit, t_unit)
    raise ValueError(f"unknown feature-distance form '{form}'")
