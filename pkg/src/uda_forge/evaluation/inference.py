"""Batched sliding-window inference and whole-manifest evaluation."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..data.manifest import DatasetManifest, require_labels
from ..engine.pseudo import argmax_lowest
from ..models import SegmentationNetwork
from .metrics import ConfusionMatrix, EvalReport, compute_iou, update_confusion

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InferConfig:
    window: int = 64
    stride: int = 48
    flip: bool = True
    batch_size: int = 8

    def validate(self) -> None:
        if self.window < 1:
            raise ValueError(f"window must be positive, got {self.window}")
        if not 0 < self.stride <= self.window:
            raise ValueError(f"need 0 < stride <= window, got stride {self.stride}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")


def _tile_positions(length: int, window: int, stride: int) -> list[int]:
    positions = list(range(0, length - window + 1, stride))
    if positions[-1] != length - window:
        positions.append(length - window)
    return positions


def _tiled_probs(net: SegmentationNetwork, image: torch.Tensor, config: InferConfig) -> torch.Tensor:
    """Window-averaged class probabilities for one (3, H, W) image, padding included."""
    _, h, w = image.shape
    win = config.window
    ph, pw = max(win - h, 0), max(win - w, 0)
    padded = F.pad(image.unsqueeze(0), (0, pw, 0, ph), mode="reflect").squeeze(0) if (ph or pw) else image
    hp, wp = padded.shape[-2:]

    tiles = []
    spots = []
    for y in _tile_positions(hp, win, config.stride):
        for x in _tile_positions(wp, win, config.stride):
            tiles.append(padded[:, y : y + win, x : x + win])
            spots.append((y, x))

    accum = torch.zeros(net.num_classes, hp, wp, dtype=image.dtype, device=image.device)
    coverage = torch.zeros(1, hp, wp, dtype=image.dtype, device=image.device)
    for start in range(0, len(tiles), config.batch_size):
        batch = torch.stack(tiles[start : start + config.batch_size])
        logits, _ = net(batch)
        probs = logits.softmax(dim=1)
        for i, (y, x) in enumerate(spots[start : start + config.batch_size]):
            accum[:, y : y + win, x : x + win] += probs[i]
            coverage[:, y : y + win, x : x + win] += 1
    return (accum / coverage)[:, :h, :w]


@torch.no_grad()
def sliding_window_infer(
    net: SegmentationNetwork, image: torch.Tensor, config: InferConfig
) -> torch.Tensor:
    """Aggregated class probabilities at full resolution, shape (C, H, W).

    Softmax outputs (not raw logits) are averaged across windows and, when
    enabled, with the un-flipped prediction of the horizontally flipped image;
    this is the same aggregation convention used for pseudo-label generation.
    """
    config.validate()
    was_training = net.training
    net.eval()
    try:
        probs = _tiled_probs(net, image, config)
        if config.flip:
            flipped = _tiled_probs(net, torch.flip(image, dims=[-1]), config)
            probs = 0.5 * (probs + torch.flip(flipped, dims=[-1]))
    finally:
        net.train(was_training)
    return probs


def predict_labels(net: SegmentationNetwork, image: np.ndarray, config: InferConfig) -> np.ndarray:
    param = next(net.parameters())
    tensor = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).to(
        dtype=param.dtype, device=param.device
    )
    probs = sliding_window_infer(net, tensor, config)
    return argmax_lowest(probs, dim=0).cpu().numpy()


def evaluate(
    net: SegmentationNetwork,
    manifest: DatasetManifest,
    config: InferConfig,
    workers: int = 1,
) -> EvalReport:
    """Confusion-matrix evaluation over a labeled manifest.

    Images are embarrassingly parallel: each worker owns a private matrix and
    the integer merge at the end is order-independent, so the report does not
    depend on the worker count.
    """
    require_labels(manifest)
    started = time.monotonic()
    space = manifest.class_space

    def one(entry) -> ConfusionMatrix:
        sample = manifest.load_sample(entry, with_label=True)
        cm = ConfusionMatrix.empty(space.num_classes, space.ignore_index)
        pred = predict_labels(net, sample.image, config)
        return update_confusion(cm, pred, sample.label)

    total = ConfusionMatrix.empty(space.num_classes, space.ignore_index)
    if workers <= 1:
        for entry in manifest.entries:
            total.merge(one(entry))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for cm in pool.map(one, manifest.entries):
                total.merge(cm)
    report = compute_iou(total, dataset_id=manifest.root.name)
    log.info(
        "evaluated %d images from %s in %.1fs (mIoU %.4f)",
        len(manifest), manifest.root, time.monotonic() - started, report.miou,
    )
    return report
