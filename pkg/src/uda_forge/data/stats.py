"""Per-class pixel and image statistics over a labeled manifest."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .manifest import DatasetManifest, require_labels


@dataclass(frozen=True)
class ClassFrequencyTable:
    """Integer pixel/image counts per class plus derived pixel frequencies."""

    pixel_count: np.ndarray  # (C,) int64
    image_count: np.ndarray  # (C,) int64

    def __post_init__(self):
        if self.pixel_count.shape != self.image_count.shape:
            raise ValueError("pixel_count and image_count must have equal length")
        if (self.pixel_count < 0).any() or (self.image_count < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def num_classes(self) -> int:
        return int(self.pixel_count.shape[0])

    @property
    def frequency(self) -> np.ndarray:
        total = int(self.pixel_count.sum())
        if total == 0:
            raise DataError("no labeled pixels")
        return self.pixel_count.astype(np.float64) / total

    def merged(self, other: "ClassFrequencyTable") -> "ClassFrequencyTable":
        """Count-weighted merge; exact because counts are integers."""
        return ClassFrequencyTable(
            pixel_count=self.pixel_count + other.pixel_count,
            image_count=self.image_count + other.image_count,
        )

    def to_csv(self, path: str | Path) -> None:
        freq = self.frequency
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["class", "pixel_count", "image_count", "frequency"])
            for c in range(self.num_classes):
                writer.writerow(
                    [c, int(self.pixel_count[c]), int(self.image_count[c]), repr(float(freq[c]))]
                )


def compute_class_frequencies(manifest: DatasetManifest) -> ClassFrequencyTable:
    """Count labeled pixels and images per class, excluding ignore_index.

    Deterministic and order-independent: per-entry counts are summed with
    integer addition, so any parallelization over entries gives the same table.
    """
    require_labels(manifest)
    num_classes = manifest.class_space.num_classes
    pixel_count = np.zeros(num_classes, dtype=np.int64)
    image_count = np.zeros(num_classes, dtype=np.int64)
    for sample in manifest.samples(with_label=True):
        label = sample.label
        counts = np.bincount(label[label != manifest.class_space.ignore_index], minlength=num_classes)
        pixel_count += counts
        image_count += counts > 0
    if pixel_count.sum() == 0:
        raise DataError(f"manifest {manifest.root}: no labeled pixels")
    return ClassFrequencyTable(pixel_count=pixel_count, image_count=image_count)
