from .inference import InferConfig, evaluate, predict_labels, sliding_window_infer
from .metrics import ConfusionMatrix, EvalReport, compute_iou, update_confusion

__all__ = [
    "InferConfig",
    "evaluate",
    "predict_labels",
    "sliding_window_infer",
    "ConfusionMatrix",
    "EvalReport",
    "compute_iou",
    "update_confusion",
]
