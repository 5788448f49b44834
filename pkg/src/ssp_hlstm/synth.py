"""Deterministic synthetic seasonal sound speed datasets.

value(d, t) = base(d) + A * exp(-d / decay) * sin(2 pi t / period + phi(d))
              + trend * t + noise

with ``phi(d) = phase + phase_lag * d`` and ``base`` piecewise linear
through a set of (depth, speed) anchors.
"""

from __future__ import annotations

import calendar
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .profile import (
    LayeredSeries,
    LayerScheme,
    SchemeKind,
    SoundSpeedProfile,
    build_series,
    write_manifest,
    write_profile_csv,
)

# 58 standard levels of gridded monthly Argo products, 2.5-1975 m
ARGO_LEVELS = (
    2.5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150, 160, 170,
    182.5, 200, 220, 240, 260, 280, 300, 320, 340, 360, 380, 400, 420, 440, 462.5,
    500, 550, 600, 650, 700, 750, 800, 850, 900, 950, 1000, 1050, 1100, 1150, 1200,
    1250, 1300, 1350, 1412.5, 1500, 1600, 1700, 1800, 1900, 1975,
)

# surface ~1520 m/s, sound channel minimum ~1480 m/s near 1000 m
DEFAULT_ANCHORS = (
    (0.0, 1520.0), (50.0, 1519.0), (100.0, 1515.0), (200.0, 1505.0), (400.0, 1492.0),
    (700.0, 1484.0), (1000.0, 1480.0), (1500.0, 1482.0), (2000.0, 1485.0),
    (3000.0, 1500.0), (4000.0, 1516.0), (6000.0, 1549.0),
)

MONTHLY = "monthly"


def argo_scheme() -> LayerScheme:
    return LayerScheme(ARGO_LEVELS, SchemeKind.UNEQUAL_INTERVAL)


def experiment_scheme() -> LayerScheme:
    """36 equally spaced layers over 0-3500 m."""
    return LayerScheme.equal_interval(0.0, 3500.0, 36)


@dataclass(frozen=True)
class SynthSpec:
    scheme: LayerScheme = field(default_factory=argo_scheme)
    steps: int = 60
    anchors: tuple = DEFAULT_ANCHORS
    amplitude: float = 5.0
    decay_depth: float = 300.0
    period: float = 12.0
    trend: float = 0.0
    noise: float = 0.0
    phase: float = 0.0
    phase_lag: float = 0.0
    rng_seed: int = 0
    start: int = calendar.timegm((2017, 1, 1, 0, 0, 0))
    cadence: str | int = MONTHLY
    profile_depths: tuple | None = None

    def __post_init__(self):
        if self.period < 2:
            raise InvalidInputError("period must be >= 2 steps")
        if self.noise < 0 or self.amplitude < 0:
            raise InvalidInputError("noise and amplitude must be non-negative")
        if self.steps < 2:
            raise InvalidInputError("need at least 2 steps")
        if self.decay_depth <= 0:
            raise InvalidInputError("decay_depth must be positive")
        if self.cadence != MONTHLY and int(self.cadence) <= 0:
            raise InvalidInputError("cadence must be 'monthly' or a positive number of seconds")


def argo_mimic_spec(**overrides) -> SynthSpec:
    """58 unequal layers, 60 monthly steps, period 12."""
    return replace(SynthSpec(), **overrides)


def experiment_mimic_spec(**overrides) -> SynthSpec:
    """36 equal layers, 14 steps two hours apart, daily period."""
    base = SynthSpec(
        scheme=experiment_scheme(), steps=14, amplitude=2.0, decay_depth=150.0,
        period=12.0, noise=0.05, start=calendar.timegm((2023, 3, 26, 0, 0, 0)), cadence=7200,
    )
    return replace(base, **overrides)


def timestamps(spec: SynthSpec) -> np.ndarray:
    if spec.cadence == MONTHLY:
        y, m = (int(v) for v in _year_month(spec.start))
        out = []
        for k in range(spec.steps):
            mm = m - 1 + k
            out.append(calendar.timegm((y + mm // 12, mm % 12 + 1, 1, 0, 0, 0)))
        return np.array(out, dtype=np.int64)
    return spec.start + int(spec.cadence) * np.arange(spec.steps, dtype=np.int64)


def _year_month(ts: int):
    t = time.gmtime(ts)
    return t.tm_year, t.tm_mon


def base_profile(spec: SynthSpec, depths) -> np.ndarray:
    a = np.asarray(spec.anchors, dtype=np.float64)
    return np.interp(np.asarray(depths, dtype=np.float64), a[:, 0], a[:, 1])


def field_values(spec: SynthSpec, depths, noise: np.ndarray | None = None) -> np.ndarray:
    """Noise-free (plus optional noise) field, shape ``(len(depths), steps)``."""
    d = np.asarray(depths, dtype=np.float64)[:, None]
    t = np.arange(spec.steps, dtype=np.float64)[None, :]
    amp = spec.amplitude * np.exp(-d / spec.decay_depth)
    phi = spec.phase + spec.phase_lag * d
    # reducing t modulo the period keeps value(d, t + period) bitwise equal
    v = base_profile(spec, d[:, 0])[:, None] + amp * np.sin(2 * np.pi * np.fmod(t, spec.period) / spec.period + phi)
    v = v + spec.trend * t
    if noise is not None:
        v = v + noise
    return v


def generate(spec: SynthSpec) -> tuple[list[SoundSpeedProfile], LayeredSeries]:
    """Profiles (file-ready) and the layered series they resample to.

    Profiles are sampled at ``spec.profile_depths`` when given, otherwise at
    the scheme depths, in which case the series is exactly the sampled field.
    """
    depths = np.asarray(spec.profile_depths if spec.profile_depths is not None
                        else spec.scheme.depths, dtype=np.float64)
    rng = np.random.default_rng(spec.rng_seed)
    noise = rng.normal(0.0, spec.noise, size=(depths.size, spec.steps)) if spec.noise > 0 else None
    values = field_values(spec, depths, noise)
    ts = timestamps(spec)
    profiles = [SoundSpeedProfile(int(ts[k]), depths, values[:, k]) for k in range(spec.steps)]
    if spec.profile_depths is None:
        series = LayeredSeries(spec.scheme, ts, values)
    else:
        series = build_series(profiles, spec.scheme)
    return profiles, series


def write_dataset(out_dir, profiles, scheme: LayerScheme, manifest_name="manifest.json") -> Path:
    """Write one CSV per profile plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(len(profiles) - 1)))
    paths = []
    for k, p in enumerate(profiles):
        path = out / f"profile_{k:0{width}d}.csv"
        write_profile_csv(path, p)
        paths.append(path)
    manifest = out / manifest_name
    write_manifest(manifest, scheme, paths)
    return manifest
