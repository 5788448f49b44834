"""Sliding-window samples, RMSE and the per-layer training loop."""

from __future__ import annotations

import csv
import enum
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericInputError
from .lstm import LstmParams, init_params

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MONTHLY_WINDOW = 12
SHORT_CADENCE_WINDOW = 4


class Optimizer(str, enum.Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class TrainConfig:
    hidden_size: int = 128
    learning_rate: float = 0.01
    epochs: int = 300
    window_length: int = MONTHLY_WINDOW
    optimizer: Optimizer = Optimizer.ADAM
    rng_seed: int = 0
    shuffle: bool = False

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if self.hidden_size < 1:
            raise InvalidInputError("hidden_size must be >= 1")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")
        if self.window_length < 1:
            raise InvalidInputError("window_length must be >= 1")
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise InvalidInputError("learning_rate must be finite and >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["optimizer"] = self.optimizer.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def default_window_length(timestamps) -> int:
    """12 for roughly monthly cadence, 4 for sub-daily experiment cadence."""
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size < 2:
        return MONTHLY_WINDOW
    step = float(np.median(np.diff(ts)))
    return MONTHLY_WINDOW if step >= 20 * 86400 else SHORT_CADENCE_WINDOW


@dataclass(frozen=True, eq=False)
class TrainingRun:
    history: np.ndarray
    params: LstmParams
    config: TrainConfig
    initial_params: LstmParams | None = field(default=None, repr=False)

    @property
    def final_loss(self) -> float:
        return float(self.history[-1])


def make_windows(layer_row, w: int) -> tuple[np.ndarray, np.ndarray]:
    """All (window, next value) pairs of a row, in time order.

    Returns ``windows`` of shape ``(n - w, w)`` and ``targets`` of shape
    ``(n - w,)``.
    """
    row = np.asarray(layer_row, dtype=np.float64).ravel()
    n = row.size
    if w < 1 or n <= w:
        raise InvalidInputError(f"row of length {n} too short for windows of {w}")
    windows = np.lib.stride_tricks.sliding_window_view(row, w)[: n - w].copy()
    return windows, row[w:].copy()


def rmse(predicted, actual) -> float:
    p = np.asarray(predicted, dtype=np.float64).ravel()
    a = np.asarray(actual, dtype=np.float64).ravel()
    if p.size == 0 or p.size != a.size:
        raise InvalidInputError("rmse needs two non-empty vectors of equal length")
    return float(np.sqrt(np.mean((p - a) ** 2)))


def layer_seed(global_seed: int, layer_index: int) -> int:
    """Seed for one layer's model, independent of training order."""
    ss = np.random.SeedSequence([int(global_seed) & 0xFFFFFFFF, int(layer_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def epoch_order(n_windows: int, epochs: int, shuffle: bool, seed: int) -> np.ndarray:
    if not shuffle:
        return np.tile(np.arange(n_windows, dtype=np.int64), (epochs, 1))
    rng = np.random.default_rng([seed, 1])
    return np.stack([rng.permutation(n_windows) for _ in range(epochs)]).astype(np.int64)


def train_layer(layer_row, config: TrainConfig, layer_index: int = 0) -> TrainingRun:
    """Train one depth layer's LSTM on its normalized history."""
    row = np.asarray(layer_row, dtype=np.float64).ravel()
    if not np.all(np.isfinite(row)):
        raise NumericInputError("layer row contains non-finite values")
    windows, targets = make_windows(row, config.window_length)
    seed = layer_seed(config.rng_seed, layer_index)
    init = init_params(config.hidden_size, 1, seed)
    W, b, w_fc, b_fc = init.arrays()
    order = epoch_order(len(targets), config.epochs, config.shuffle, seed)
    history = np.zeros(config.epochs)
    kernels.train_lstm(
        W, b, w_fc, b_fc, windows[:, :, None], targets, order,
        float(config.learning_rate), config.optimizer is Optimizer.ADAM,
        ADAM_BETA1, ADAM_BETA2, ADAM_EPS, history,
    )
    if not (np.all(np.isfinite(history)) and np.all(np.isfinite(W))):
        raise NumericInputError(f"training diverged on layer {layer_index}")
    history.setflags(write=False)
    return TrainingRun(history, LstmParams(W, b, w_fc, b_fc[0]), config, init)


def write_loss_history(path: str | os.PathLike, history) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss"])
        for e, loss in enumerate(history, 1):
            w.writerow([e, repr(float(loss))])
