"""Per-layer min-max scaling of a layered series and its exact inverse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericInputError
from .profile import LayeredSeries


@dataclass(frozen=True, eq=False)
class NormalizationParams:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        lo = np.array(self.mins, dtype=np.float64).ravel()
        hi = np.array(self.maxs, dtype=np.float64).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("need one (min, max) pair per layer")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise NumericInputError("normalization bounds must be finite")
        if np.any(lo > hi):
            raise InvalidInputError("min exceeds max for some layer")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "mins", lo)
        object.__setattr__(self, "maxs", hi)

    @property
    def n_layers(self) -> int:
        return self.mins.size

    @property
    def span(self) -> np.ndarray:
        return self.maxs - self.mins

    def __eq__(self, other):
        if not isinstance(other, NormalizationParams):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.maxs, other.maxs)


def fit_normalizer(series: LayeredSeries) -> NormalizationParams:
    return NormalizationParams(series.values.min(axis=1), series.values.max(axis=1))


def normalize_values(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Map a ``(n_layers, ...)`` array to [0, 1] per layer; constant layers map to 0.5."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape[:1] != (params.n_layers,):
        raise InvalidInputError(
            f"leading dimension {v.shape[:1]} does not match {params.n_layers} layers"
        )
    extra = (slice(None),) + (None,) * (v.ndim - 1)
    span = params.span[extra]
    lo = params.mins[extra]
    degenerate = span == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (v - lo) / np.where(degenerate, 1.0, span)
    return np.where(degenerate, 0.5, out)


def normalize(series: LayeredSeries, params: NormalizationParams) -> LayeredSeries:
    if series.n_layers != params.n_layers:
        raise InvalidInputError(
            f"series has {series.n_layers} layers, normalizer has {params.n_layers}"
        )
    return LayeredSeries(series.scheme, series.timestamps, normalize_values(series.values, params))


def denormalize(values: np.ndarray, params: NormalizationParams) -> np.ndarray:
    """Inverse of :func:`normalize_values`.

    ``values`` is either a vector with one entry per layer or a matrix whose
    first axis indexes layers. Constant layers return their min whatever the
    input.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 0 or v.shape[0] != params.n_layers:
        raise InvalidInputError(
            f"layer dimension of shape {v.shape} does not match {params.n_layers} layers"
        )
    extra = (slice(None),) + (None,) * (v.ndim - 1)
    span = params.span[extra]
    lo = params.mins[extra]
    return np.where(span == 0, lo, v * span + lo)
