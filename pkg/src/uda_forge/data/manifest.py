"""Dataset manifests: directory layout, loading, and per-sample access.

Layout on disk::

    <root>/manifest.json          {domain, class_names, ignore_index, entries: [{id}]}
    <root>/images/<id>.png        8-bit RGB
    <root>/labels/<id>.png        8-bit single channel, pixel value = class id (optional per id)
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from .classes import ClassSpace

SOURCE = "source"
TARGET = "target"
DOMAINS = (SOURCE, TARGET)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: Path
    label_path: Path | None


@dataclass(frozen=True)
class SegmentationSample:
    """One image with an optional dense label map and its domain tag."""

    image: np.ndarray  # H x W x 3 float32 in [0, 1]
    label: np.ndarray | None  # H x W int64 over class ids + ignore_index
    domain: str
    id: str

    def __post_init__(self):
        if self.label is not None and self.label.shape != self.image.shape[:2]:
            raise DataError(
                f"sample '{self.id}': image {self.image.shape[:2]} and label "
                f"{self.label.shape} disagree"
            )


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    entries: tuple[ManifestEntry, ...]
    class_space: ClassSpace
    domain: str

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def has_labels(self) -> bool:
        return all(e.label_path is not None for e in self.entries)

    def entry_by_id(self, sample_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == sample_id:
                return e
        raise KeyError(sample_id)

    def load_sample(self, entry: ManifestEntry | str, with_label: bool = True) -> SegmentationSample:
        if isinstance(entry, str):
            entry = self.entry_by_id(entry)
        image = _read_image(entry.image_path, entry.id)
        label = None
        if with_label and entry.label_path is not None:
            label = _read_label(entry.label_path, entry.id, self.class_space)
        return SegmentationSample(image=image, label=label, domain=self.domain, id=entry.id)

    def samples(self, with_label: bool = True):
        for e in self.entries:
            yield self.load_sample(e, with_label=with_label)


def _read_image(path: Path, sample_id: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    except OSError as exc:
        raise DataError(f"sample '{sample_id}': cannot read image {path}: {exc}") from exc
    return arr


def _read_label(path: Path, sample_id: str, class_space: ClassSpace) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "P", "I", "I;16"):
                raise DataError(
                    f"sample '{sample_id}': label {path} is not single-channel (mode {img.mode})"
                )
            arr = np.asarray(img, dtype=np.int64)
    except OSError as exc:
        raise DataError(f"sample '{sample_id}': cannot read label {path}: {exc}") from exc
    if arr.ndim != 2:
        raise DataError(f"sample '{sample_id}': label {path} has shape {arr.shape}")
    valid = (arr >= 0) & (arr < class_space.num_classes) | (arr == class_space.ignore_index)
    if not valid.all():
        bad = int(arr[~valid].flat[0])
        raise DataError(
            f"sample '{sample_id}': label value {bad} outside classes "
            f"0..{class_space.num_classes - 1} and ignore_index {class_space.ignore_index}"
        )
    return arr


def load_manifest(path: str | Path, domain: str, class_space: ClassSpace | None = None) -> DatasetManifest:
    """Load and validate a manifest directory.

    Entries are ordered lexicographically by id so iteration order is identical
    across filesystems. Every referenced file must exist and every present label
    is range-checked up front. Source manifests must be fully labeled; target
    manifests may carry labels, which are retained for evaluation only.
    """
    root = Path(path)
    meta_path = root / "manifest.json"
    if not meta_path.is_file():
        raise DataError(f"no manifest.json under {root}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed manifest.json under {root}: {exc}") from exc
    if domain not in DOMAINS:
        raise DataError(f"unknown domain '{domain}', expected one of {DOMAINS}")
    file_space = ClassSpace.from_dict(meta)
    if class_space is not None and class_space != file_space:
        raise DataError(
            f"manifest {root} declares class space {file_space.names} but "
            f"{class_space.names} was requested"
        )
    space = class_space or file_space

    entries = []
    for item in meta.get("entries", []):
        sample_id = item["id"]
        image_path = root / "images" / f"{sample_id}.png"
        label_path = root / "labels" / f"{sample_id}.png"
        if not image_path.is_file():
            raise DataError(f"sample '{sample_id}': missing image {image_path}")
        if not label_path.is_file():
            if domain == SOURCE:
                raise DataError(f"sample '{sample_id}': missing label {label_path}")
            label_path = None
        else:
            _read_label(label_path, sample_id, space)  # validate shape and value range up front
        entries.append(ManifestEntry(id=sample_id, image_path=image_path, label_path=label_path))
    if not entries:
        raise DataError(f"manifest {root} lists no entries")
    entries.sort(key=lambda e: e.id)
    return DatasetManifest(root=root, entries=tuple(entries), class_space=space, domain=domain)


def require_labels(manifest: DatasetManifest) -> None:
    missing = [e.id for e in manifest.entries if e.label_path is None]
    if missing:
        raise DataError(
            f"manifest {manifest.root} has {len(missing)} unlabeled entries "
            f"(first: '{missing[0]}') where labels are required"
        )


def write_manifest_meta(root: Path, class_space: ClassSpace, domain: str, ids: list[str]) -> None:
    meta = {
        "domain": domain,
        **class_space.to_dict(),
        "entries": [{"id": i} for i in sorted(ids)],
    }
    (root / "manifest.json").write_text(json.dumps(meta, indent=2) + "\n")
