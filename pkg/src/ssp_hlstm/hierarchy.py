"""One LSTM per depth layer: training, forecasting, validation and persistence."""

from __future__ import annotations

import calendar
import json
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    InvalidInputError,
    ModelChecksumError,
    ModelFormatError,
    ModelShapeError,
    ModelTruncatedError,
    ModelVersionError,
)
from .lstm import LstmParams, predict_window
from .normalization import NormalizationParams, denormalize, fit_normalizer, normalize_values
from .profile import (
    LayeredSeries,
    LayerScheme,
    SoundSpeedProfile,
    full_depth_grid,
    interpolate_full_depth,
    resample_profile,
)
from .training import TrainConfig, TrainingRun, rmse, train_layer


@dataclass(frozen=True, eq=False)
class HierarchicalModel:
    scheme: LayerScheme
    layers: tuple[LstmParams, ...]
    normalizer: NormalizationParams
    config: TrainConfig
    timestamps: np.ndarray
    loss_histories: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if len(self.layers) != self.scheme.n_layers:
            raise InvalidInputError("need exactly one parameter set per layer")
        if self.normalizer.n_layers != self.scheme.n_layers:
            raise InvalidInputError("normalizer does not match the layer scheme")
        ts = np.array(self.timestamps, dtype=np.int64)
        ts.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        if self.loss_histories is not None:
            h = np.array(self.loss_histories, dtype=np.float64)
            if h.ndim != 2 or h.shape[0] != self.scheme.n_layers:
                raise InvalidInputError("loss histories must be (n_layers, epochs)")
            h.setflags(write=False)
            object.__setattr__(self, "loss_histories", h)

    @property
    def n_layers(self) -> int:
        return self.scheme.n_layers

    @property
    def window_length(self) -> int:
        return self.config.window_length

    def final_losses(self) -> np.ndarray | None:
        return None if self.loss_histories is None else self.loss_histories[:, -1].copy()


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def train_hierarchical(
    series: LayeredSeries, config: TrainConfig, workers: int = 1
) -> HierarchicalModel:
    """Fit the normalizer and train every layer's model independently.

    Layers may run on ``workers`` threads; each layer uses its own
    index-derived seed, so the result does not depend on the worker count.
    """
    if series.n_steps <= config.window_length:
        raise InvalidInputError(
            f"series of {series.n_steps} steps too short for window {config.window_length}"
        )
    normalizer = fit_normalizer(series)
    rows = normalize_values(series.values, normalizer)
    runs: list[TrainingRun] = _map(
        lambda i: train_layer(rows[i], config, i), range(series.n_layers), workers
    )
    return HierarchicalModel(
        series.scheme,
        tuple(r.params for r in runs),
        normalizer,
        config,
        series.timestamps,
        np.stack([r.history for r in runs]),
    )


def _check_compatible(model: HierarchicalModel, series: LayeredSeries, min_steps: int):
    if series.scheme != model.scheme:
        raise InvalidInputError("series layer scheme differs from the model's")
    if series.n_steps < min_steps:
        raise InvalidInputError(f"series needs at least {min_steps} steps, has {series.n_steps}")


def _layer_trajectory(params: LstmParams, window: np.ndarray, horizon: int) -> np.ndarray:
    buf = list(window)
    out = np.empty(horizon)
    for k in range(horizon):
        p = predict_window(params, np.asarray(buf[-len(window):]))
        out[k] = p
        buf.append(p)
    return out


def _forecast_normalized(model, series, horizon, workers) -> np.ndarray:
    w = model.window_length
    rows = normalize_values(series.values[:, -w:], model.normalizer)
    trajs = _map(
        lambda i: _layer_trajectory(model.layers[i], rows[i], horizon),
        range(model.n_layers),
        workers,
    )
    return np.stack(trajs)  # (layers, horizon)


def predict_next(model: HierarchicalModel, series: LayeredSeries, workers: int = 1) -> np.ndarray:
    """Next-step speed for every layer (m/s)."""
    _check_compatible(model, series, model.window_length)
    return denormalize(_forecast_normalized(model, series, 1, workers)[:, 0], model.normalizer)


def predict_multi(
    model: HierarchicalModel, series: LayeredSeries, horizon: int, workers: int = 1
) -> np.ndarray:
    """Autoregressive forecast, shape ``(horizon, n_layers)`` in m/s.

    Each step's normalized prediction is appended to that layer's window
    before predicting the next step.
    """
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    _check_compatible(model, series, model.window_length)
    norm = _forecast_normalized(model, series, horizon, workers)
    return denormalize(norm, model.normalizer).T.copy()


# --- time stepping ------------------------------------------------------------


def _is_month_start(ts: int) -> bool:
    d = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    return d.day == 1 and d.hour == 0 and d.minute == 0 and d.second == 0


def add_months(ts: int, n: int) -> int:
    d = datetime.fromtimestamp(int(ts), tz=timezone.utc)
    m = d.month - 1 + n
    return calendar.timegm((d.year + m // 12, m % 12 + 1, 1, 0, 0, 0))


def next_timestamps(timestamps: Sequence[int], horizon: int) -> np.ndarray:
    """Timestamps of the next ``horizon`` steps at the history's cadence.

    Month-start histories advance by calendar months; anything else by the
    median spacing.
    """
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size < 2:
        raise InvalidInputError("cadence needs at least two timestamps")
    last = int(ts[-1])
    if all(_is_month_start(t) for t in ts):
        return np.array([add_months(last, k) for k in range(1, horizon + 1)], dtype=np.int64)
    step = int(np.median(np.diff(ts)))
    return last + step * np.arange(1, horizon + 1, dtype=np.int64)


# --- reports ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ForecastReport:
    """Layered forecast, assembled full-depth profiles and (optionally) errors.

    ``predicted`` is ``(horizon, n_layers)``. Error fields refer to the first
    forecast step and are present only when a truth profile was given.
    """

    method: str
    scheme: LayerScheme
    timestamps: np.ndarray
    predicted: np.ndarray
    query_depths: np.ndarray
    profiles: tuple[SoundSpeedProfile, ...]
    truth_layers: np.ndarray | None = None
    truth_full: np.ndarray | None = None
    layer_rmse: np.ndarray | None = None
    full_depth_rmse: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.predicted.shape[0]

    def to_dict(self) -> dict:
        f = lambda a: None if a is None else [float(x) for x in np.ravel(a)]
        return {
            "method": self.method,
            "scheme": self.scheme.to_dict(),
            "timestamps": [int(t) for t in self.timestamps],
            "predicted": [f(row) for row in self.predicted],
            "full_depth": {
                "depths": f(self.query_depths),
                "predicted": [f(p.speeds) for p in self.profiles],
                "actual": f(self.truth_full),
            },
            "actual_layers": f(self.truth_layers),
            "layer_rmse": f(self.layer_rmse),
            "full_depth_rmse": None if self.full_depth_rmse is None else float(self.full_depth_rmse),
            **self.extra,
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    def write_forecast_csv(self, path) -> None:
        """One row per forecast step: ``step,timestamp,layer_1..layer_n``."""
        head = ["step", "timestamp"] + [f"layer_{i + 1}" for i in range(self.scheme.n_layers)]
        lines = [",".join(head)]
        for k in range(self.horizon):
            vals = [repr(float(v)) for v in self.predicted[k]]
            lines.append(",".join([str(k + 1), str(int(self.timestamps[k]))] + vals))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_layer_csv(self, path) -> None:
        """Per-layer table for the first step: ``layer,depth_m,predicted,actual,rmse``."""
        lines = ["layer,depth_m,predicted,actual,rmse"]
        for i, d in enumerate(self.scheme.depths):
            act = "" if self.truth_layers is None else repr(float(self.truth_layers[i]))
            err = "" if self.layer_rmse is None else repr(float(self.layer_rmse[i]))
            lines.append(f"{i + 1},{float(d)!r},{float(self.predicted[0, i])!r},{act},{err}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def write_full_depth_csv(self, path) -> None:
        if self.truth_full is not None:
            head = ["depth_m", "predicted", "actual"]
            cols = [self.profiles[0].speeds, self.truth_full]
        else:
            head = ["depth_m"] + [f"step_{k + 1}" for k in range(self.horizon)]
            cols = [p.speeds for p in self.profiles]
        lines = [",".join(head)]
        for j, d in enumerate(self.query_depths):
            lines.append(",".join([repr(float(d))] + [repr(float(c[j])) for c in cols]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_report(
    method: str,
    scheme: LayerScheme,
    predicted: np.ndarray,
    timestamps: Sequence[int],
    truth: SoundSpeedProfile | None = None,
    query_depths=None,
) -> ForecastReport:
    """Assemble full-depth profiles and, given ``truth``, per-layer and full-depth RMSE.

    Per-layer error is the single-sample RMSE (absolute error) against the
    truth resampled onto the scheme; full-depth RMSE compares both curves
    linearly interpolated onto ``query_depths`` (default: 1 m grid over the
    scheme's depth range).
    """
    pred = np.atleast_2d(np.asarray(predicted, dtype=np.float64))
    if pred.shape[1] != scheme.n_layers:
        raise InvalidInputError("prediction width does not match the scheme")
    ts = np.asarray(timestamps, dtype=np.int64)
    if ts.size != pred.shape[0]:
        raise InvalidInputError("need one timestamp per forecast step")
    q = full_depth_grid(scheme) if query_depths is None else np.asarray(query_depths, dtype=np.float64)
    profiles = tuple(interpolate_full_depth(pred[k], scheme, q, int(ts[k])) for k in range(len(ts)))
    if truth is None:
        return ForecastReport(method, scheme, ts, pred, q, profiles)
    truth_layers = resample_profile(truth, scheme)
    layer_rmse = np.array([rmse([p], [a]) for p, a in zip(pred[0], truth_layers)])
    truth_full = np.interp(q, truth.depths, truth.speeds)
    return ForecastReport(
        method, scheme, ts, pred, q, profiles,
        truth_layers=truth_layers,
        truth_full=truth_full,
        layer_rmse=layer_rmse,
        full_depth_rmse=rmse(profiles[0].speeds, truth_full),
    )


def forecast(
    model: HierarchicalModel, series: LayeredSeries, horizon: int = 1, query_depths=None, workers: int = 1
) -> ForecastReport:
    pred = predict_multi(model, series, horizon, workers)
    return make_report("H-LSTM", model.scheme, pred, next_timestamps(series.timestamps, horizon),
                       query_depths=query_depths)


def validate(
    model: HierarchicalModel,
    series: LayeredSeries,
    truth: SoundSpeedProfile,
    query_depths=None,
    workers: int = 1,
) -> ForecastReport:
    """Predict the step after ``series`` and score it against ``truth``."""
    if truth.timestamp <= series.timestamps[-1]:
        raise InvalidInputError("truth profile must be later than the last series timestamp")
    pred = predict_next(model, series, workers)
    return make_report("H-LSTM", model.scheme, pred[None, :], [truth.timestamp], truth, query_depths)


# --- persistence ----------------------------------------------------------------

MAGIC = b"SSPHLSTM"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_CRC = struct.Struct("<I")


def _header(model: HierarchicalModel) -> dict:
    E = 0 if model.loss_histories is None else model.loss_histories.shape[1]
    p0 = model.layers[0]
    return {
        "scheme": model.scheme.to_dict(),
        "normalizer": {
            "mins": [float(x) for x in model.normalizer.mins],
            "maxs": [float(x) for x in model.normalizer.maxs],
        },
        "config": model.config.to_dict(),
        "timestamps": [int(t) for t in model.timestamps],
        "n_layers": model.n_layers,
        "hidden_size": p0.hidden_size,
        "input_size": p0.input_size,
        "history_epochs": E,
    }


def _block_len(hidden: int, input_size: int, epochs: int) -> int:
    G = 4 * hidden
    return G * (hidden + input_size) + G + hidden + 1 + epochs


def model_to_bytes(model: HierarchicalModel) -> bytes:
    header = json.dumps(_header(model), sort_keys=True, separators=(",", ":")).encode("utf-8")
    blocks = []
    for i, p in enumerate(model.layers):
        if p.W.shape != model.layers[0].W.shape:
            raise InvalidInputError("all layers must share hidden/input sizes")
        parts = [p.flat()]
        if model.loss_histories is not None:
            parts.append(model.loss_histories[i])
        blocks.append(np.concatenate(parts).astype("<f8").tobytes())
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(blocks)
    return body + _CRC.pack(zlib.crc32(body))


def model_from_bytes(data: bytes) -> HierarchicalModel:
    if len(data) < _PREFIX.size + _CRC.size:
        raise ModelTruncatedError("file too short to be a model")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"unsupported model format version {version}")
    hstart = _PREFIX.size
    if hstart + hlen + _CRC.size > len(data):
        raise ModelTruncatedError("header extends past end of file")
    crc_ok = _CRC.unpack_from(data, len(data) - _CRC.size)[0] == zlib.crc32(data[:-_CRC.size])
    try:
        hdr = json.loads(data[hstart:hstart + hlen].decode("utf-8"))
        L, H, I, E = hdr["n_layers"], hdr["hidden_size"], hdr["input_size"], hdr["history_epochs"]
        expected = hstart + hlen + 8 * L * _block_len(H, I, E) + _CRC.size
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        if not crc_ok:
            raise ModelChecksumError("checksum mismatch (corrupted header)") from None
        raise ModelFormatError(f"malformed header: {exc}") from None
    if len(data) < expected:
        raise ModelTruncatedError(f"model file truncated ({len(data)} of {expected} bytes)")
    if not crc_ok:
        raise ModelChecksumError("checksum mismatch")
    if len(data) != expected:
        raise ModelShapeError("file length inconsistent with declared shapes")
    try:
        scheme = LayerScheme.from_dict(hdr["scheme"])
        normalizer = NormalizationParams(hdr["normalizer"]["mins"], hdr["normalizer"]["maxs"])
        config = TrainConfig.from_dict(hdr["config"])
        if scheme.n_layers != L or normalizer.n_layers != L or config.hidden_size != H:
            raise ModelShapeError("layer counts or sizes disagree inside the header")
        blk = _block_len(H, I, E)
        flat = np.frombuffer(data, dtype="<f8", count=L * blk, offset=hstart + hlen).reshape(L, blk)
        n_p = blk - E
        layers = tuple(LstmParams.from_flat(flat[i, :n_p], H, I) for i in range(L))
        hist = flat[:, n_p:].astype(np.float64) if E else None
        return HierarchicalModel(scheme, layers, normalizer, config, hdr["timestamps"], hist)
    except ModelFormatError:
        raise
    except (InvalidInputError, KeyError, TypeError, ValueError) as exc:
        raise ModelShapeError(f"inconsistent model contents: {exc}") from None


def save_model(model: HierarchicalModel, path: str | os.PathLike) -> None:
    Path(path).write_bytes(model_to_bytes(model))


def load_model(path: str | os.PathLike) -> HierarchicalModel:
    return model_from_bytes(Path(path).read_bytes())
