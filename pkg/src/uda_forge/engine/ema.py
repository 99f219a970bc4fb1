"""Exponential-moving-average teacher tracking a student network."""

from __future__ import annotations

import copy

import torch
import torch.nn as nn


def ema_update(teacher: nn.Module, student: nn.Module, momentum: float) -> None:
    """In-place: teacher params <- momentum * teacher + (1 - momentum) * student.

    Normalization running statistics (all buffers) are copied from the student,
    so the teacher normalizes exactly like the model that produced the update.
    """
    if not 0.0 <= momentum <= 1.0:
        raise ValueError(f"momentum must lie in [0, 1], got {momentum}")
    t_params = dict(teacher.named_parameters())
    s_params = dict(student.named_parameters())
    if t_params.keys() != s_params.keys():
        raise ValueError("teacher/student parameter trees have different names")
    with torch.no_grad():
        for name, t in t_params.items():
            s = s_params[name]
            if t.shape != s.shape:
                raise ValueError(f"parameter '{name}' shape mismatch: {t.shape} vs {s.shape}")
            t.mul_(momentum).add_(s, alpha=1.0 - momentum)
        for (name, tb), (_, sb) in zip(teacher.named_buffers(), student.named_buffers()):
            tb.copy_(sb)


class EmaTeacher:
    """Holds the smoothed copy; never receives gradients."""

    def __init__(self, student: nn.Module, momentum: float):
        self.momentum = float(momentum)
        self.net = copy.deepcopy(student)
        self.net.requires_grad_(False)
        self.net.eval()

    def update(self, student: nn.Module) -> None:
        ema_update(self.net, student, self.momentum)

    def copy_from(self, student: nn.Module) -> None:
        self.net.load_state_dict(student.state_dict())
