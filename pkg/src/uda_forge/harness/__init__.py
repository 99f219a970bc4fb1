from .config import (
    DataConfig,
    EvalSettings,
    ExperimentConfig,
    FdReferenceConfig,
    PAPER_VALUES,
    dump_resolved,
    resolve_config,
)
from .runner import (
    AblationRow,
    AblationTable,
    BatchSampler,
    RunResult,
    SeedResult,
    StabilityReport,
    mode_toggles,
    run_ablation_suite,
    run_stability,
    run_training,
    runtime_device,
)

__all__ = [
    "DataConfig",
    "EvalSettings",
    "ExperimentConfig",
    "FdReferenceConfig",
    "PAPER_VALUES",
    "dump_resolved",
    "resolve_config",
    "AblationRow",
    "AblationTable",
    "BatchSampler",
    "RunResult",
    "SeedResult",
    "StabilityReport",
    "mode_toggles",
    "run_ablation_suite",
    "run_stability",
    "run_training",
    "runtime_device",
]
