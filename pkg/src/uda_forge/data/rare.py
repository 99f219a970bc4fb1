"""Temperature-weighted sampling that over-represents infrequent classes.

Sampling distribution: p_c proportional to exp((1 - f_c) / T) over classes whose
pool of containing images is non-empty, where f_c is the pixel frequency of
class c. Low T concentrates on the rarest class; high T approaches uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from .manifest import DatasetManifest, require_labels
from .stats import ClassFrequencyTable


@dataclass(frozen=True)
class RareClassIndex:
    pools: tuple[tuple[str, ...], ...]  # per class: ids of samples containing it
    distribution: np.ndarray  # (C,) float64, p_c = 0 for empty pools
    temperature: float

    def __post_init__(self):
        p = self.distribution
        if not np.isclose(p.sum(), 1.0, atol=1e-9):
            raise ValueError(f"sampling distribution sums to {p.sum()}, expected 1")
        for c, pool in enumerate(self.pools):
            if len(pool) == 0 and p[c] != 0.0:
                raise ValueError(f"class {c} has an empty pool but p={p[c]}")
            if len(pool) > 0 and p[c] <= 0.0:
                raise ValueError(f"class {c} has a non-empty pool but p={p[c]}")


def build_rare_class_index(
    freqs: ClassFrequencyTable, manifest: DatasetManifest, temperature: float
) -> RareClassIndex:
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    require_labels(manifest)
    num_classes = freqs.num_classes
    ignore = manifest.class_space.ignore_index

    pools: list[list[str]] = [[] for _ in range(num_classes)]
    for sample in manifest.samples(with_label=True):
        present = np.unique(sample.label)
        for c in present:
            if c != ignore:
                pools[int(c)].append(sample.id)
    if all(len(pool) == 0 for pool in pools):
        raise DataError(f"manifest {manifest.root}: every class pool is empty")

    f = freqs.frequency
    nonempty = np.array([len(pool) > 0 for pool in pools])
    # Subtracting the max exponent before exp keeps tiny temperatures finite.
    exponent = (1.0 - f) / temperature
    exponent = np.where(nonempty, exponent, -np.inf)
    weights = np.exp(exponent - exponent[nonempty].max())
    p = weights / weights.sum()
    return RareClassIndex(
        pools=tuple(tuple(pool) for pool in pools),
        distribution=p,
        temperature=float(temperature),
    )


def sample_source(index: RareClassIndex, rng: np.random.Generator) -> str:
    """Draw class c ~ p, then a uniform member of its pool."""
    c = int(rng.choice(len(index.distribution), p=index.distribution))
    pool = index.pools[c]
    return pool[int(rng.integers(len(pool)))]


def uniform_sample(manifest: DatasetManifest, rng: np.random.Generator) -> str:
    """Uniform draw over manifest entries; the non-RCS sampling path."""
    return manifest.entries[int(rng.integers(len(manifest.entries)))].id
