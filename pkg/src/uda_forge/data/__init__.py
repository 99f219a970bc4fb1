from .classes import ClassSpace, toy_class_space
from .manifest import (
    DOMAINS,
    SOURCE,
    TARGET,
    DatasetManifest,
    ManifestEntry,
    SegmentationSample,
    load_manifest,
    require_labels,
)
from .rare import RareClassIndex, build_rare_class_index, sample_source, uniform_sample
from .stats import ClassFrequencyTable, compute_class_frequencies
from .toy import ToyConfig, ensure_toy_domains, generate_toy_domains

__all__ = [
    "ClassSpace",
    "toy_class_space",
    "DOMAINS",
    "SOURCE",
    "TARGET",
    "DatasetManifest",
    "ManifestEntry",
    "SegmentationSample",
    "load_manifest",
    "require_labels",
    "RareClassIndex",
    "build_rare_class_index",
    "sample_source",
    "uniform_sample",
    "ClassFrequencyTable",
    "compute_class_frequencies",
    "ToyConfig",
    "ensure_toy_domains",
    "generate_toy_domains",
]
