"""Per-layer comparison predictors: historical mean, polynomial trend, BP network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericInputError
from .hierarchy import (
    ForecastReport,
    HierarchicalModel,
    _map,
    make_report,
    predict_next,
    train_hierarchical,
)
from .normalization import NormalizationParams, denormalize, fit_normalizer, normalize_values
from .profile import LayeredSeries, SoundSpeedProfile
from .training import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    Optimizer,
    TrainConfig,
    epoch_order,
    layer_seed,
    make_windows,
)

DEFAULT_POLY_DEGREE = 3
DEFAULT_POLY_HISTORY = 24
DEFAULT_BP_HIDDEN = 128


def mean_baseline(series: LayeredSeries) -> np.ndarray:
    return series.values.mean(axis=1)


# --- polynomial -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolyFit:
    """Least-squares polynomials in scaled time, one per layer.

    ``coefficients[i]`` are increasing-power coefficients for layer ``i`` in
    the variable ``u`` that maps the fitted history onto [-1, 1].
    """

    degree: int
    history: int
    coefficients: np.ndarray

    def next_u(self) -> float:
        n = self.history
        return 1.0 if n == 1 else (n + 1) / (n - 1)

    def predict(self, u: float | None = None) -> np.ndarray:
        u = self.next_u() if u is None else u
        return np.polynomial.polynomial.polyval(u, self.coefficients.T)


def scaled_time(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return (2.0 * np.arange(n) - (n - 1)) / (n - 1)


def fit_polynomials(series: LayeredSeries, degree: int, history: int) -> PolyFit:
    if degree < 0 or history < 1:
        raise InvalidInputError("degree must be >= 0 and history >= 1")
    if history > series.n_steps:
        raise InvalidInputError(f"history {history} exceeds series length {series.n_steps}")
    if degree + 1 > history:
        raise InvalidInputError(f"degree {degree} is underdetermined by {history} samples")
    u = scaled_time(history)
    V = np.polynomial.polynomial.polyvander(u, degree)
    Y = series.values[:, -history:].T
    coef, *_ = np.linalg.lstsq(V, Y, rcond=None)
    return PolyFit(degree, history, coef.T.copy())


def poly_baseline(
    series: LayeredSeries, degree: int = DEFAULT_POLY_DEGREE, history: int = DEFAULT_POLY_HISTORY
) -> np.ndarray:
    """Extrapolate each layer's recent trend one step ahead."""
    return fit_polynomials(series, degree, history).predict()


# --- BP network ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float

    def __post_init__(self):
        W1 = np.array(self.W1, dtype=np.float64)
        b1 = np.array(self.b1, dtype=np.float64).ravel()
        w2 = np.array(self.w2, dtype=np.float64).ravel()
        if W1.ndim != 2 or b1.shape != (W1.shape[0],) or w2.shape != (W1.shape[0],):
            raise InvalidInputError("inconsistent MLP parameter shapes")
        if not all(np.all(np.isfinite(a)) for a in (W1, b1, w2)) or not np.isfinite(self.b2):
            raise NumericInputError("MLP parameters contain non-finite values")
        for a in (W1, b1, w2):
            a.setflags(write=False)
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", float(self.b2))

    @property
    def hidden_size(self) -> int:
        return self.W1.shape[0]

    @property
    def window_length(self) -> int:
        return self.W1.shape[1]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def arrays(self):
        return self.W1.copy(), self.b1.copy(), self.w2.copy(), np.array([self.b2])

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return self.W1.shape == other.W1.shape and np.array_equal(self.flat(), other.flat())


def init_mlp(hidden: int, n_in: int, rng_seed: int) -> MlpParams:
    if hidden < 1 or n_in < 1:
        raise InvalidInputError("sizes must be >= 1")
    rng = np.random.default_rng(rng_seed)
    W1 = rng.uniform(-1, 1, size=(hidden, n_in)) / np.sqrt(n_in)
    w2 = rng.uniform(-1, 1, size=hidden) / np.sqrt(hidden)
    return MlpParams(W1, np.zeros(hidden), w2, 0.0)


def mlp_predict(params: MlpParams, window) -> float:
    x = np.ascontiguousarray(window, dtype=np.float64).ravel()
    if x.size != params.window_length:
        raise InvalidInputError("window length does not match the network input")
    return float(kernels.mlp_forward(params.W1, params.b1, params.w2, np.array([params.b2]), x,
                                     np.empty(params.hidden_size)))


def mlp_gradient(params: MlpParams, window, d_prediction: float) -> MlpParams:
    """Gradient of ``d_prediction * output`` w.r.t. the parameters (same layout)."""
    x = np.ascontiguousarray(window, dtype=np.float64).ravel()
    Hm = params.hidden_size
    hbuf = np.empty(Hm)
    kernels.mlp_forward(params.W1, params.b1, params.w2, np.array([params.b2]), x, hbuf)
    dW1, db1, dw2 = np.empty_like(params.W1), np.empty(Hm), np.empty(Hm)
    db2 = kernels.mlp_backward(params.W1, params.w2, x, hbuf, float(d_prediction), dW1, db1, dw2)
    return MlpParams(dW1, db1, dw2, db2)


def mlp_gradient_check(params: MlpParams, window, target: float = 0.0, epsilon: float = 1e-5) -> float:
    """Worst relative error of the squared-error gradient against central differences."""
    x = np.ascontiguousarray(window, dtype=np.float64).ravel()
    r = mlp_predict(params, x) - target
    g_a = mlp_gradient(params, x, 2.0 * r).flat()
    W1, b1, w2, b2 = params.arrays()
    g_n = np.empty_like(g_a)
    c = 0
    hbuf = np.empty(params.hidden_size)
    for v in (W1.reshape(-1), b1, w2, b2):
        for k in range(v.size):
            orig = v[k]
            v[k] = orig + epsilon
            lp = (kernels.mlp_forward(W1, b1, w2, b2, x, hbuf) - target) ** 2
            v[k] = orig - epsilon
            lm = (kernels.mlp_forward(W1, b1, w2, b2, x, hbuf) - target) ** 2
            v[k] = orig
            g_n[c] = (lp - lm) / (2.0 * epsilon)
            c += 1
    denom = np.maximum(np.maximum(np.abs(g_a), np.abs(g_n)), 1e-12)
    return float(np.max(np.abs(g_a - g_n) / denom))


@dataclass(frozen=True, eq=False)
class BpModel:
    layers: tuple[MlpParams, ...]
    normalizer: NormalizationParams
    config: TrainConfig
    loss_histories: np.ndarray | None = None

    @property
    def window_length(self) -> int:
        return self.layers[0].window_length


def _train_mlp_layer(row, config: TrainConfig, hidden: int, layer_index: int):
    windows, targets = make_windows(row, config.window_length)
    seed = layer_seed(config.rng_seed, layer_index)
    W1, b1, w2, b2 = init_mlp(hidden, config.window_length, seed).arrays()
    order = epoch_order(len(targets), config.epochs, config.shuffle, seed)
    history = np.zeros(config.epochs)
    kernels.train_mlp(
        W1, b1, w2, b2, windows, targets, order, float(config.learning_rate),
        config.optimizer is Optimizer.ADAM, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, history,
    )
    if not np.all(np.isfinite(history)):
        raise NumericInputError(f"BP training diverged on layer {layer_index}")
    return MlpParams(W1, b1, w2, b2[0]), history


def bp_baseline_train(
    series: LayeredSeries, config: TrainConfig, hidden: int = DEFAULT_BP_HIDDEN, workers: int = 1
) -> BpModel:
    """Train one tanh MLP per layer on the same windows, scaling and schedule as the LSTMs."""
    if series.n_steps <= config.window_length:
        raise InvalidInputError(
            f"series of {series.n_steps} steps too short for window {config.window_length}"
        )
    normalizer = fit_normalizer(series)
    rows = normalize_values(series.values, normalizer)
    out = _map(lambda i: _train_mlp_layer(rows[i], config, hidden, i), range(series.n_layers), workers)
    return BpModel(tuple(p for p, _ in out), normalizer, config, np.stack([h for _, h in out]))


def bp_baseline_predict(model: BpModel, series: LayeredSeries) -> np.ndarray:
    if series.n_layers != len(model.layers):
        raise InvalidInputError("series layer count differs from the BP model's")
    w = model.window_length
    if series.n_steps < w:
        raise InvalidInputError(f"series needs at least {w} steps")
    rows = normalize_values(series.values[:, -w:], model.normalizer)
    norm = np.array([mlp_predict(p, rows[i]) for i, p in enumerate(model.layers)])
    return denormalize(norm, model.normalizer)


# --- four-way comparison -----------------------------------------------------------

METHODS = ("Mean value", "Polynomial fitting", "BP", "H-LSTM")


def compare_methods(
    series: LayeredSeries,
    truth: SoundSpeedProfile,
    config: TrainConfig,
    poly_degree: int = DEFAULT_POLY_DEGREE,
    poly_history: int = DEFAULT_POLY_HISTORY,
    bp_hidden: int = DEFAULT_BP_HIDDEN,
    query_depths=None,
    workers: int = 1,
    model: HierarchicalModel | None = None,
) -> dict[str, ForecastReport]:
    """Score all four predictors on the step after ``series`` against ``truth``."""
    if truth.timestamp <= series.timestamps[-1]:
        raise InvalidInputError("truth profile must be later than the last series timestamp")
    if model is None:
        model = train_hierarchical(series, config, workers)
    bp = bp_baseline_train(series, config, bp_hidden, workers)
    preds = {
        "Mean value": mean_baseline(series),
        "Polynomial fitting": poly_baseline(series, poly_degree, min(poly_history, series.n_steps)),
        "BP": bp_baseline_predict(bp, series),
        "H-LSTM": predict_next(model, series, workers),
    }
    return {
        name: make_report(name, series.scheme, preds[name][None, :], [truth.timestamp], truth,
                          query_depths)
        for name in METHODS
    }
