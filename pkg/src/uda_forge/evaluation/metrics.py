"""Confusion-matrix accumulation and IoU metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError


@dataclass
class ConfusionMatrix:
    """counts[g][p] = pixels with ground truth g predicted as p; ignore pixels skipped."""

    counts: np.ndarray
    ignore_index: int

    @classmethod
    def empty(cls, num_classes: int, ignore_index: int) -> "ConfusionMatrix":
        return cls(counts=np.zeros((num_classes, num_classes), dtype=np.int64), ignore_index=ignore_index)

    @property
    def num_classes(self) -> int:
        return int(self.counts.shape[0])

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        self.counts += other.counts
        return self


def update_confusion(cm: ConfusionMatrix, pred: np.ndarray, gt: np.ndarray) -> ConfusionMatrix:
    if pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} differ")
    c = cm.num_classes
    if np.any(pred == cm.ignore_index):
        raise ValueError("predictions must be class ids; found ignore_index in pred")
    if pred.min() < 0 or pred.max() >= c:
        raise ValueError(f"prediction values outside 0..{c - 1}")
    valid = gt != cm.ignore_index
    if not valid.any():
        return cm
    g = gt[valid].astype(np.int64)
    if g.min() < 0 or g.max() >= c:
        raise ValueError(f"ground-truth values outside 0..{c - 1} and ignore_index")
    p = pred[valid].astype(np.int64)
    cm.counts += np.bincount(g * c + p, minlength=c * c).reshape(c, c)
    return cm


@dataclass(frozen=True)
class EvalReport:
    """Per-class IoU and their mean over defined classes.

    A class absent from both prediction and ground truth has no defined IoU; it
    is flagged and excluded from the mean rather than scored.
    """

    per_class_iou: tuple[float | None, ...]
    miou: float
    tp: tuple[int, ...]
    fp: tuple[int, ...]
    fn: tuple[int, ...]
    pixel_total: int
    dataset_id: str = ""

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "miou": self.miou,
            "pixel_total": self.pixel_total,
            "per_class": [
                {"class": c, "iou": iou, "tp": tp, "fp": fp, "fn": fn}
                for c, (iou, tp, fp, fn) in enumerate(zip(self.per_class_iou, self.tp, self.fp, self.fn))
            ],
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "iou", "tp", "fp", "fn"])
            for c in range(len(self.per_class_iou)):
                iou = self.per_class_iou[c]
                writer.writerow(
                    [c, "" if iou is None else repr(iou), self.tp[c], self.fp[c], self.fn[c]]
                )

    def format_table(self, class_names: tuple[str, ...] | None = None) -> str:
        lines = [f"{'class':<14}{'iou':>8}"]
        for c, iou in enumerate(self.per_class_iou):
            name = class_names[c] if class_names else str(c)
            cell = "   --" if iou is None else f"{100 * iou:8.1f}"
            lines.append(f"{name:<14}{cell:>8}")
        lines.append(f"{'mIoU':<14}{100 * self.miou:8.1f}")
        return "\n".join(lines)


def compute_iou(cm: ConfusionMatrix, dataset_id: str = "") -> EvalReport:
    total = int(cm.counts.sum())
    if total == 0:
        raise DataError("no labeled pixels")
    tp = np.diag(cm.counts)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    denom = tp + fp + fn
    per_class: list[float | None] = []
    defined = []
    for c in range(cm.num_classes):
        if denom[c] > 0:
            value = float(tp[c] / denom[c])
            per_class.append(value)
            defined.append(value)
        else:
            per_class.append(None)
    return EvalReport(
        per_class_iou=tuple(per_class),
        miou=float(np.mean(defined)),
        tp=tuple(int(x) for x in tp),
        fp=tuple(int(x) for x in fp),
        fn=tuple(int(x) for x in fn),
        pixel_total=total,
        dataset_id=dataset_id,
    )
