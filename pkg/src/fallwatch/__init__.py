"""fallwatch: a wearable fall-detection toolkit.

Signal preprocessing, a from-scratch stacked LSTM classifier trained with
Adam, magnitude weight pruning, recall-oriented evaluation, and a
streaming runtime that turns window probabilities into debounced alerts.
"""

from .data import (
    DatasetSplit,
    GenConfig,
    LabeledRecording,
    Window,
    generate_synthetic,
    load_csv,
    make_windows,
    prepare_split,
    stratified_split,
    write_csv,
)
from .errors import FallwatchError
from .metrics import ConfusionMatrix, auc, confusion, report, roc
from .model_io import load_model, save_model
from .network import LstmModel, backward, cross_entropy_loss, forward, init_model, lstm_cell_step
from .optim import AdamState, TrainConfig, TrainHistory, adam_step, train
from .pruning import CompressedModel, PruneMask, finetune, magnitude_prune, sparsity
from .signals import (
    FilterSpec,
    NormParams,
    PreprocessConfig,
    RawSeries,
    apply_normalizer,
    butterworth_lowpass,
    fit_normalizer,
    median_filter,
)
from .stream import FallAlert, SensorFrame, StreamConfig, stream_infer

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "CompressedModel",
    "ConfusionMatrix",
    "DatasetSplit",
    "FallAlert",
    "FallwatchError",
    "FilterSpec",
    "GenConfig",
    "LabeledRecording",
    "LstmModel",
    "NormParams",
    "PreprocessConfig",
    "PruneMask",
    "RawSeries",
    "SensorFrame",
    "StreamConfig",
    "TrainConfig",
    "TrainHistory",
    "Window",
    "adam_step",
    "apply_normalizer",
    "auc",
    "backward",
    "butterworth_lowpass",
    "confusion",
    "cross_entropy_loss",
    "finetune",
    "fit_normalizer",
    "forward",
    "generate_synthetic",
    "init_model",
    "load_csv",
    "load_model",
    "lstm_cell_step",
    "magnitude_prune",
    "make_windows",
    "median_filter",
    "prepare_split",
    "report",
    "roc",
    "save_model",
    "sparsity",
    "stratified_split",
    "stream_infer",
    "train",
    "write_csv",
]
