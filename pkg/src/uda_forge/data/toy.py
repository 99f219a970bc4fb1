"""Procedural two-domain benchmark: geometric scenes with a controllable appearance shift.

Both domains share scene geometry and label semantics. Target images pass through
a systematic appearance shift (global channel mixing, illumination gradient,
extra texture noise) whose magnitude is a single knob; at magnitude 0 the target
pipeline is the identity and both domains sample the same distribution.

The shift is designed to defeat color-keyed classifiers: the channel mix moves
each class's palette color toward another class's source color, so recovering
target accuracy requires shape cues rather than color lookup.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from .classes import ClassSpace, toy_class_space
from .manifest import SOURCE, TARGET, DatasetManifest, load_manifest, write_manifest_meta

# Palette for background + up to 7 object classes.
_BASE_COLORS = np.array(
    [
        [0.34, 0.38, 0.30],  # backdrop: muted green-gray
        [0.78, 0.21, 0.18],  # disc: red
        [0.22, 0.70, 0.26],  # box: green
        [0.20, 0.32, 0.78],  # wedge: blue
        [0.78, 0.72, 0.20],  # band: yellow
        [0.72, 0.22, 0.72],  # cross: magenta
        [0.20, 0.72, 0.70],  # extra: cyan
        [0.85, 0.50, 0.20],  # extra: orange
    ]
)

# Channel-mixing matrix applied at full shift; rolls energy across channels so
# every class color drifts toward a different class's source color.
_MIX = np.array(
    [
        [0.25, 0.75, 0.00],
        [0.00, 0.25, 0.75],
        [0.75, 0.00, 0.25],
    ]
)
_OFFSET = np.array([0.06, -0.04, 0.08])


@dataclass(frozen=True)
class ToyConfig:
    image_size: int = 96
    num_classes: int = 6
    num_source: int = 400
    num_target_train: int = 400
    num_target_val: int = 100
    shift: float = 1.0
    min_objects: int = 3
    max_objects: int = 6
    class_weights: tuple[float, ...] | None = None  # over object classes 1..C-1
    illumination: float = 0.5  # gradient amplitude at full shift
    noise: float = 0.02  # base pixel noise, both domains
    target_noise: float = 0.03  # extra target noise at full shift

    def validate(self) -> None:
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")
        if not 2 <= self.num_classes <= len(_BASE_COLORS):
            raise ValueError(
                f"num_classes must be in [2, {len(_BASE_COLORS)}], got {self.num_classes}"
            )
        if min(self.num_source, self.num_target_train, self.num_target_val) < 1:
            raise ValueError("all split counts must be positive")
        if not 1 <= self.min_objects <= self.max_objects:
            raise ValueError("need 1 <= min_objects <= max_objects")
        if self.shift < 0:
            raise ValueError(f"shift must be non-negative, got {self.shift}")
        if self.class_weights is not None and len(self.class_weights) != self.num_classes - 1:
            raise ValueError("class_weights must cover classes 1..C-1")


def _object_class_probs(config: ToyConfig) -> np.ndarray:
    if config.class_weights is not None:
        w = np.asarray(config.class_weights, dtype=np.float64)
    else:
        # Mild imbalance so rare-class sampling has something to do.
        w = np.linspace(1.6, 1.0, config.num_classes - 1)
    return w / w.sum()


def _rotated_coords(size: int, cx: float, cy: float, angle: float):
    ys, xs = np.mgrid[0:size, 0:size]
    dx, dy = xs - cx, ys - cy
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    return dx * cos_a + dy * sin_a, -dx * sin_a + dy * cos_a


def _shape_mask(kind: int, size: int, cx: float, cy: float, scale: float, angle: float) -> np.ndarray:
    xr, yr = _rotated_coords(size, cx, cy, angle)
    if kind == 0:  # disc
        return xr * xr + yr * yr <= scale * scale
    if kind == 1:  # box
        return (np.abs(xr) <= scale * 0.9) & (np.abs(yr) <= scale * 0.9)
    if kind == 2:  # wedge: width grows linearly from apex to base
        h = scale * 2.2
        half_w = (yr + h / 2) / h * scale
        return (yr >= -h / 2) & (yr <= h / 2) & (np.abs(xr) <= half_w)
    if kind == 3:  # band: thin elongated bar
        return (np.abs(yr) <= scale * 0.38) & (np.abs(xr) <= scale * 1.8)
    # cross: two perpendicular bars
    t, arm = scale * 0.36, scale * 1.35
    return ((np.abs(xr) <= t) & (np.abs(yr) <= arm)) | ((np.abs(yr) <= t) & (np.abs(xr) <= arm))


def _render_scene(config: ToyConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Compose one scene; returns (image in [0,1], label map)."""
    size = config.image_size
    label = np.zeros((size, size), dtype=np.int64)
    image = np.empty((size, size, 3), dtype=np.float64)
    image[:] = _BASE_COLORS[0] + rng.normal(0.0, 0.04, size=3)

    # Low-frequency background texture, shared by all pixels.
    coarse = rng.normal(0.0, 0.06, size=(size // 8 + 1, size // 8 + 1))
    ys = np.linspace(0, coarse.shape[0] - 1 - 1e-9, size)
    xs = np.linspace(0, coarse.shape[1] - 1 - 1e-9, size)
    y0, x0 = np.floor(ys).astype(int), np.floor(xs).astype(int)
    fy, fx = (ys - y0)[:, None], (xs - x0)[None, :]
    texture = (
        coarse[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + coarse[np.ix_(y0 + 1, x0)] * fy * (1 - fx)
        + coarse[np.ix_(y0, x0 + 1)] * (1 - fy) * fx
        + coarse[np.ix_(y0 + 1, x0 + 1)] * fy * fx
    )
    image += texture[:, :, None]

    probs = _object_class_probs(config)
    count = int(rng.integers(config.min_objects, config.max_objects + 1))
    for _ in range(count):
        cls = 1 + int(rng.choice(config.num_classes - 1, p=probs))
        kind = (cls - 1) % 5
        cx, cy = rng.uniform(0.12 * size, 0.88 * size, size=2)
        scale = rng.uniform(0.08 * size, 0.16 * size)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        mask = _shape_mask(kind, size, cx, cy, scale, angle)
        if not mask.any():
            continue
        color = _BASE_COLORS[cls] + rng.normal(0.0, 0.03, size=3)
        image[mask] = color + texture[mask, None] * 0.5
        label[mask] = cls

    image += rng.normal(0.0, config.noise, size=image.shape)
    return image, label


def _apply_target_shift(image: np.ndarray, config: ToyConfig, rng: np.random.Generator) -> np.ndarray:
    """Global color mix + illumination ramp + extra noise; identity at shift 0."""
    s = config.shift
    mix = (1.0 - s) * np.eye(3) + s * _MIX
    shifted = image @ mix.T + s * _OFFSET

    size = config.image_size
    angle = rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.uniform(0.6, 1.0) * config.illumination * s
    ys, xs = np.mgrid[0:size, 0:size]
    ramp = ((xs * np.cos(angle) + ys * np.sin(angle)) / size) - 0.5 * (np.cos(angle) + np.sin(angle))
    shifted *= 1.0 + amp * ramp[:, :, None]

    shifted += rng.normal(0.0, config.target_noise * s, size=shifted.shape)
    return shifted


def _write_split(
    root: Path,
    split_dir: str,
    prefix: str,
    count: int,
    domain: str,
    with_labels: bool,
    shifted: bool,
    config: ToyConfig,
    seed: int,
    stream: int,
    class_space: ClassSpace,
    cache: dict | None = None,
) -> Path:
    out = root / split_dir
    (out / "images").mkdir(parents=True, exist_ok=True)
    if with_labels:
        (out / "labels").mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(count):
        sample_id = f"{prefix}{i:04d}"
        ids.append(sample_id)
        if cache is not None and sample_id in cache:
            image, label = cache[sample_id]
        else:
            rng = np.random.default_rng([seed, stream, i])
            image, label = _render_scene(config, rng)
            if shifted:
                image = _apply_target_shift(image, config, rng)
            image = np.clip(image, 0.0, 1.0)
            if cache is not None:
                cache[sample_id] = (image, label)
        Image.fromarray(np.round(image * 255.0).astype(np.uint8), mode="RGB").save(
            out / "images" / f"{sample_id}.png"
        )
        if with_labels:
            Image.fromarray(label.astype(np.uint8), mode="L").save(
                out / "labels" / f"{sample_id}.png"
            )
    write_manifest_meta(out, class_space, domain, ids)
    return out


def generate_toy_domains(
    root: str | Path, config: ToyConfig, seed: int
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Write the benchmark under ``root`` and return its three manifests.

    Splits: ``source`` (labeled), ``target_train`` (unlabeled), ``target_val``
    (labeled). A labeled twin of target_train is also written under
    ``target_train_labeled`` so fully-supervised upper-bound runs have target
    training labels without touching the val split. Fully determined by
    ``(config, seed)``; regenerating is byte-identical.
    """
    config.validate()
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    space = toy_class_space(config.num_classes)

    _write_split(root, "source", "src_", config.num_source, SOURCE, True, False, config, seed, 0, space)
    tt_cache: dict = {}
    _write_split(
        root, "target_train", "tgt_", config.num_target_train, TARGET, False, True,
        config, seed, 1, space, cache=tt_cache,
    )
    _write_split(
        root, "target_train_labeled", "tgt_", config.num_target_train, TARGET, True, True,
        config, seed, 1, space, cache=tt_cache,
    )
    _write_split(root, "target_val", "val_", config.num_target_val, TARGET, True, True, config, seed, 2, space)

    fingerprint = {"config": asdict(config), "seed": seed}
    (root / "generator_config.json").write_text(json.dumps(fingerprint, indent=2) + "\n")

    return (
        load_manifest(root / "source", SOURCE),
        load_manifest(root / "target_train", TARGET),
        load_manifest(root / "target_val", TARGET),
    )


def ensure_toy_domains(
    root: str | Path, config: ToyConfig, seed: int
) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Reuse an existing generation when its fingerprint matches, else generate."""
    root = Path(root)
    marker = root / "generator_config.json"
    if marker.is_file():
        recorded = json.loads(marker.read_text())
        wanted = {"config": asdict(config), "seed": seed}
        if recorded != wanted:
            raise DataError(
                f"{root} holds a benchmark generated with different parameters; "
                "point the config at a fresh directory"
            )
        return (
            load_manifest(root / "source", SOURCE),
            load_manifest(root / "target_train", TARGET),
            load_manifest(root / "target_val", TARGET),
        )
    return generate_toy_domains(root, config, seed)
