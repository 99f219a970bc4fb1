"""Experiment orchestration: training runs, seed-stability suites, ablation suites."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from ..data import (
    SOURCE,
    TARGET,
    DatasetManifest,
    RareClassIndex,
    build_rare_class_index,
    compute_class_frequencies,
    load_manifest,
    sample_source,
    uniform_sample,
)
from ..data.toy import ensure_toy_domains
from ..engine import (
    EmaTeacher,
    FrozenReference,
    GroupDescriptor,
    ROLE_ENCODER,
    ROLE_HEAD,
    Toggles,
    build_optimizer,
    build_toy_reference,
    effective_schedule,
    load_external_reference,
    lr_at,
    train_step,
)
from ..errors import ConfigError, DataError, UdaForgeError
from ..evaluation import EvalReport, InferConfig, evaluate
from ..models import SegmentationNetwork, build_network
from ..seeding import LANE_SOURCE, LANE_TARGET, step_rng
from .config import ExperimentConfig, dump_resolved

log = logging.getLogger(__name__)

DEVICE_ENV = "UDA_FORGE_DEVICE"


def runtime_device() -> torch.device:
    return torch.device(os.environ.get(DEVICE_ENV, "cpu"))


def mode_toggles(config: ExperimentConfig) -> Toggles:
    """Supervised modes train the plain segmentation objective; only UDA uses
    the pseudo-label, mixing, masking, and alignment streams."""
    if config.mode == "uda":
        return config.toggles
    return dataclasses.replace(
        config.toggles, ema=False, dacs=False, mic=False, fd_loss=False
    )


class BatchSampler:
    """Draws training batches from a manifest with crop/flip augmentation.

    All randomness comes from the generator handed to :meth:`batch`, so the
    sampler itself is stateless and shareable.
    """

    def __init__(
        self,
        manifest: DatasetManifest,
        crop: int,
        hflip: bool,
        with_labels: bool,
        rcs_index: RareClassIndex | None = None,
        cache: bool = True,
    ):
        self.manifest = manifest
        self.crop = crop
        self.hflip = hflip
        self.with_labels = with_labels
        self.rcs_index = rcs_index
        self._cache: dict | None = {} if cache else None

    def _load(self, sample_id: str):
        if self._cache is not None and sample_id in self._cache:
            return self._cache[sample_id]
        sample = self.manifest.load_sample(sample_id, with_label=self.with_labels)
        pair = (sample.image, sample.label)
        if self._cache is not None:
            self._cache[sample_id] = pair
        return pair

    def batch(self, rng: np.random.Generator, batch_size: int):
        images = []
        labels = []
        for _ in range(batch_size):
            if self.rcs_index is not None:
                sample_id = sample_source(self.rcs_index, rng)
            else:
                sample_id = uniform_sample(self.manifest, rng)
            image, label = self._load(sample_id)
            h, w = image.shape[:2]
            if h < self.crop or w < self.crop:
                raise DataError(
                    f"sample '{sample_id}' is {h}x{w}, smaller than train_crop {self.crop}"
                )
            y = int(rng.integers(h - self.crop + 1))
            x = int(rng.integers(w - self.crop + 1))
            flip = self.hflip and rng.random() < 0.5
            img = image[y : y + self.crop, x : x + self.crop]
            if flip:
                img = img[:, ::-1]
            images.append(np.ascontiguousarray(img.transpose(2, 0, 1)))
            if self.with_labels:
                lbl = label[y : y + self.crop, x : x + self.crop]
                if flip:
                    lbl = lbl[:, ::-1]
                labels.append(np.ascontiguousarray(lbl))
        image_batch = torch.from_numpy(np.stack(images))
        label_batch = torch.from_numpy(np.stack(labels)) if self.with_labels else None
        return image_batch, label_batch


@dataclass
class RunResult:
    out_dir: Path
    steps: int
    final_report: EvalReport
    out_of_target_report: EvalReport | None
    metrics_path: Path
    checkpoint_path: Path


def _resolve_manifests(config: ExperimentConfig, out_dir: Path):
    """Returns (train labeled manifest, target-train stream or None, val, out-of-target or None)."""
    data = config.data
    if data.kind == "toy":
        root = Path(data.root) if data.root else out_dir / "toy_data"
        source, target_train, target_val = ensure_toy_domains(root, data.toy, data.toy_seed)
        if config.mode == "oracle":
            train = load_manifest(root / "target_train_labeled", TARGET)
        else:
            train = source
        out_of_target = None
    else:
        if config.mode == "oracle":
            train = load_manifest(data.oracle_train_manifest, TARGET)
        else:
            train = load_manifest(data.source_manifest, SOURCE)
        target_train = (
            load_manifest(data.target_train_manifest, TARGET)
            if data.target_train_manifest
            else None
        )
        target_val = load_manifest(data.target_val_manifest, TARGET)
        out_of_target = (
            load_manifest(data.out_of_target_manifest, TARGET)
            if data.out_of_target_manifest
            else None
        )
    stream = target_train if config.mode == "uda" else None
    return train, stream, target_val, out_of_target


def _build_reference(config: ExperimentConfig, student: SegmentationNetwork) -> FrozenReference:
    ref = config.fd_reference
    if ref.checkpoint:
        reference = load_external_reference(ref.checkpoint, student.pad_multiple)
    else:
        reference = build_toy_reference(
            patch_size=config.model.encoder.patch_size,
            embed_dim=ref.embed_dim,
            depth=ref.depth,
            num_heads=ref.num_heads,
            seed=ref.seed,
            pad_multiple=student.pad_multiple,
        )
    if reference.encoder.config.embed_dim != config.model.projector_dim:
        raise ConfigError(
            f"model.projector_dim={config.model.projector_dim} must match the reference "
            f"extractor width {reference.encoder.config.embed_dim}"
        )
    return reference


def _save_checkpoint(
    path: Path,
    step: int,
    config: ExperimentConfig,
    student: SegmentationNetwork,
    teacher: EmaTeacher | None,
    optimizer: torch.optim.Optimizer,
) -> None:
    torch.save(
        {
            "step": step,
            "model_config": student.config.to_dict(),
            "student": student.state_dict(),
            "teacher": None if teacher is None else teacher.net.state_dict(),
            "optimizer": optimizer.state_dict(),
            "experiment": config.to_dict(),
        },
        path,
    )


def run_training(config: ExperimentConfig, resume_from: str | Path | None = None) -> RunResult:
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_resolved(config, out_dir)
    device = runtime_device()
    toggles = mode_toggles(config)
    schedule = config.schedule
    constants = config.constants

    train_manifest, target_stream, target_val, out_of_target = _resolve_manifests(config, out_dir)
    space = train_manifest.class_space
    if space.num_classes != config.model.decoder.num_classes:
        raise ConfigError(
            f"model.decoder.num_classes={config.model.decoder.num_classes} but data "
            f"declares {space.num_classes} classes"
        )

    rcs_index = None
    if toggles.rcs:
        freqs = compute_class_frequencies(train_manifest)
        freqs.to_csv(out_dir / "class_frequencies.csv")
        rcs_index = build_rare_class_index(freqs, train_manifest, constants.rcs_temperature)

    labeled_sampler = BatchSampler(
        train_manifest, config.train_crop, config.train_hflip, True, rcs_index, config.data.cache
    )
    target_sampler = (
        BatchSampler(
            target_stream, config.train_crop, config.train_hflip, False, None, config.data.cache
        )
        if target_stream is not None
        else None
    )

    student = build_network(config.model, config.seed).to(device)
    teacher = EmaTeacher(student, constants.alpha) if target_sampler is not None else None
    reference = _build_reference(config, student).to(device) if toggles.fd_loss else None
    optimizer = build_optimizer(student, schedule)

    start_step = 0
    if resume_from is not None:
        payload = torch.load(resume_from, map_location=device, weights_only=True)
        if payload["model_config"] != config.model.to_dict():
            raise ConfigError(f"checkpoint {resume_from} was written by a different model config")
        student.load_state_dict(payload["student"])
        if teacher is not None:
            if payload["teacher"] is None:
                raise ConfigError(f"checkpoint {resume_from} has no teacher state")
            teacher.net.load_state_dict(payload["teacher"])
        optimizer.load_state_dict(payload["optimizer"])
        start_step = int(payload["step"])
        log.info("resumed from %s at step %d", resume_from, start_step)

    eff_schedule = effective_schedule(schedule, toggles)
    n_blocks = len(student.encoder.blocks)
    decoder_group = GroupDescriptor("decoder", ROLE_HEAD)
    encoder_top = GroupDescriptor("encoder.top", ROLE_ENCODER, n_blocks - 1, n_blocks)
    infer_config = InferConfig(
        window=config.eval.window,
        stride=config.eval.stride,
        flip=config.eval.flip,
        batch_size=config.eval.batch_size,
    )

    metrics_path = out_dir / "metrics.jsonl"
    checkpoint_path = out_dir / "checkpoint.pt"
    started = time.monotonic()
    with open(metrics_path, "a") as metrics:
        for step in range(start_step, schedule.total_iters):
            src_images, src_labels = labeled_sampler.batch(
                step_rng(config.seed, step, LANE_SOURCE), schedule.batch_size
            )
            src_images = src_images.to(device)
            src_labels = src_labels.to(device)
            tgt_images = None
            if target_sampler is not None:
                tgt_images, _ = target_sampler.batch(
                    step_rng(config.seed, step, LANE_TARGET), schedule.batch_size
                )
                tgt_images = tgt_images.to(device)

            report = train_step(
                student, teacher, reference, optimizer, schedule, toggles, constants,
                step, config.seed, src_images, src_labels, tgt_images, space.ignore_index,
            )

            if step % config.log_interval == 0 or step == schedule.total_iters - 1:
                line = {
                    "step": step,
                    "lr_decoder": lr_at(eff_schedule, step, decoder_group),
                    "lr_encoder_top": lr_at(eff_schedule, step, encoder_top),
                }
                line.update({k: v for k, v in report.to_dict().items() if k != "step"})
                metrics.write(json.dumps(line) + "\n")
                metrics.flush()

            done = step + 1
            if config.eval.interval and done % config.eval.interval == 0 and done < schedule.total_iters:
                snapshot_report = evaluate(student, target_val, infer_config, config.eval.workers)
                metrics.write(json.dumps({"step": step, "eval_miou": snapshot_report.miou}) + "\n")
                metrics.flush()
            if done % config.checkpoint_interval == 0:
                _save_checkpoint(checkpoint_path, done, config, student, teacher, optimizer)

    final_checkpoint = out_dir / "checkpoint_final.pt"
    _save_checkpoint(final_checkpoint, schedule.total_iters, config, student, teacher, optimizer)

    final_report = evaluate(student, target_val, infer_config, config.eval.workers)
    final_report.save_json(out_dir / "eval_target_val.json")
    final_report.save_csv(out_dir / "eval_target_val.csv")
    oot_report = None
    if out_of_target is not None:
        oot_report = evaluate(student, out_of_target, infer_config, config.eval.workers)
        oot_report.save_json(out_dir / "eval_out_of_target.json")
        oot_report.save_csv(out_dir / "eval_out_of_target.csv")

    summary = {
        "mode": config.mode,
        "seed": config.seed,
        "steps": schedule.total_iters,
        "final_miou": final_report.miou,
        "out_of_target_miou": None if oot_report is None else oot_report.miou,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log.info(
        "run %s finished: %d steps in %.1fs, target-val mIoU %.4f",
        out_dir, schedule.total_iters - start_step, time.monotonic() - started, final_report.miou,
    )
    return RunResult(
        out_dir=out_dir,
        steps=schedule.total_iters,
        final_report=final_report,
        out_of_target_report=oot_report,
        metrics_path=metrics_path,
        checkpoint_path=final_checkpoint,
    )


def _with_shared_toy_root(config: ExperimentConfig, suite_dir: Path) -> ExperimentConfig:
    """Point suite sub-runs at one benchmark directory so it is generated once."""
    if config.data.kind != "toy" or config.data.root:
        return config
    shared = dataclasses.replace(config.data, root=str(suite_dir / "toy_data"))
    return dataclasses.replace(config, data=shared)


@dataclass(frozen=True)
class SeedResult:
    seed: int
    status: str  # "ok" | "failed"
    miou: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class StabilityReport:
    entries: tuple[SeedResult, ...]
    best: float
    worst: float
    average: float
    std_dev: float  # population

    def to_dict(self) -> dict:
        return {
            "entries": [dataclasses.asdict(e) for e in self.entries],
            "best": self.best,
            "worst": self.worst,
            "average": self.average,
            "std_dev": self.std_dev,
        }

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def run_stability(config: ExperimentConfig, seeds: list[int]) -> StabilityReport:
    """Train once per seed and aggregate final in-target mIoU.

    Failed seeds are recorded and excluded from the statistics; the CLI turns
    any failure into a nonzero exit.
    """
    if len(seeds) < 2:
        raise ConfigError(f"stability needs at least 2 seeds, got {len(seeds)}")
    suite_dir = Path(config.out_dir)
    suite_dir.mkdir(parents=True, exist_ok=True)
    base = _with_shared_toy_root(config, suite_dir)

    entries: list[SeedResult] = []
    for position, seed in enumerate(seeds):
        sub = dataclasses.replace(
            base, seed=seed, out_dir=str(suite_dir / f"run{position}_seed{seed}")
        )
        try:
            result = run_training(sub)
            entries.append(SeedResult(seed=seed, status="ok", miou=result.final_report.miou))
        except (UdaForgeError, RuntimeError) as exc:
            log.error("seed %d failed: %s", seed, exc)
            entries.append(SeedResult(seed=seed, status="failed", error=str(exc)))

    scores = [e.miou for e in entries if e.status == "ok"]
    if not scores:
        raise DataError("every stability run failed")
    report = StabilityReport(
        entries=tuple(entries),
        best=float(max(scores)),
        worst=float(min(scores)),
        average=float(np.mean(scores)),
        std_dev=float(np.std(scores)),
    )
    report.save_json(suite_dir / "stability.json")
    return report


@dataclass(frozen=True)
class AblationRow:
    removed: str  # "" for the base row
    miou: float
    delta: float  # miou - base miou; negative means the removal hurt

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class AblationTable:
    rows: tuple[AblationRow, ...]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def format_table(self) -> str:
        lines = [f"{'removed':<16}{'miou':>8}{'delta':>8}"]
        for row in self.rows:
            name = row.removed or "(none)"
            lines.append(f"{name:<16}{100 * row.miou:8.1f}{100 * row.delta:+8.1f}")
        return "\n".join(lines)


def run_ablation_suite(config: ExperimentConfig, toggle_names: list[str]) -> AblationTable:
    """One run per single-toggle removal, with deltas against the base run."""
    valid = set(Toggles.__dataclass_fields__)
    for name in toggle_names:
        if name not in valid:
            raise ConfigError(f"unknown toggle '{name}'; choose from {sorted(valid)}")
    suite_dir = Path(config.out_dir)
    suite_dir.mkdir(parents=True, exist_ok=True)
    base = _with_shared_toy_root(config, suite_dir)

    base_run = run_training(dataclasses.replace(base, out_dir=str(suite_dir / "base")))
    rows = [AblationRow(removed="", miou=base_run.final_report.miou, delta=0.0)]
    for name in toggle_names:
        toggles = dataclasses.replace(base.toggles, **{name: False})
        sub = dataclasses.replace(base, toggles=toggles, out_dir=str(suite_dir / f"no_{name}"))
        result = run_training(sub)
        rows.append(
            AblationRow(
                removed=name,
                miou=result.final_report.miou,
                delta=result.final_report.miou - base_run.final_report.miou,
            )
        )
    table = AblationTable(rows=tuple(rows))
    table.save_json(suite_dir / "ablation.json")
    return table
