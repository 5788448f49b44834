"""Sound speed profiles, depth layer schemes and layered time series.

Also holds the on-disk dataset format: one CSV per profile plus a JSON
manifest naming the layer scheme and the ordered profile files.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, NumericInputError

MANIFEST_FORMAT = "ssp-manifest"
MANIFEST_VERSION = 1
CSV_HEADER = "depth_m,speed_mps"


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class SchemeKind(str, enum.Enum):
    EQUAL_INTERVAL = "equal_interval"
    UNEQUAL_INTERVAL = "unequal_interval"


@dataclass(frozen=True)
class DepthSample:
    depth: float
    speed: float

    def __post_init__(self):
        if not (np.isfinite(self.depth) and self.depth >= 0):
            raise InvalidInputError(f"depth must be finite and >= 0, got {self.depth}")
        if not (np.isfinite(self.speed) and self.speed > 0):
            raise InvalidInputError(f"speed must be finite and > 0, got {self.speed}")


@dataclass(frozen=True, eq=False)
class SoundSpeedProfile:
    """One timestamped depth -> speed curve.

    Depths in meters (strictly increasing), speeds in m/s, timestamp in
    integer epoch seconds.
    """

    timestamp: int
    depths: np.ndarray
    speeds: np.ndarray

    def __post_init__(self):
        d = np.array(self.depths, dtype=np.float64).ravel()
        s = np.array(self.speeds, dtype=np.float64).ravel()
        if d.size == 0:
            raise InvalidInputError("profile has no samples")
        if d.shape != s.shape:
            raise InvalidInputError("depths and speeds differ in length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(s))):
            raise NumericInputError("profile contains non-finite values")
        if np.any(d < 0) or np.any(s <= 0):
            raise InvalidInputError("depths must be >= 0 and speeds > 0")
        if np.any(np.diff(d) <= 0):
            raise InvalidInputError("profile depths must be strictly increasing")
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "depths", _readonly(d))
        object.__setattr__(self, "speeds", _readonly(s))

    @classmethod
    def from_samples(cls, timestamp: int, samples: Iterable[DepthSample]) -> "SoundSpeedProfile":
        samples = list(samples)
        return cls(timestamp, [x.depth for x in samples], [x.speed for x in samples])

    @property
    def samples(self) -> list[DepthSample]:
        return [DepthSample(float(d), float(s)) for d, s in zip(self.depths, self.speeds)]

    def __len__(self):
        return self.depths.size

    def __eq__(self, other):
        if not isinstance(other, SoundSpeedProfile):
            return NotImplemented
        return (
            self.timestamp == other.timestamp
            and np.array_equal(self.depths, other.depths)
            and np.array_equal(self.speeds, other.speeds)
        )


@dataclass(frozen=True, eq=False)
class LayerScheme:
    """Ordered depth grid; one hierarchical layer per depth."""

    depths: np.ndarray
    kind: SchemeKind = SchemeKind.UNEQUAL_INTERVAL

    def __post_init__(self):
        d = np.array(self.depths, dtype=np.float64).ravel()
        kind = SchemeKind(self.kind)
        if d.size < 2:
            raise InvalidInputError("a layer scheme needs at least 2 depths")
        if not np.all(np.isfinite(d)):
            raise NumericInputError("scheme depths must be finite")
        step = np.diff(d)
        if np.any(step <= 0):
            raise InvalidInputError("scheme depths must be strictly increasing")
        if kind is SchemeKind.EQUAL_INTERVAL and not np.allclose(step, step[0], rtol=1e-9, atol=0):
            raise InvalidInputError("equal_interval scheme has unequal spacing")
        object.__setattr__(self, "depths", _readonly(d))
        object.__setattr__(self, "kind", kind)

    @classmethod
    def equal_interval(cls, start: float, stop: float, n_layers: int) -> "LayerScheme":
        return cls(np.linspace(start, stop, n_layers), SchemeKind.EQUAL_INTERVAL)

    @property
    def n_layers(self) -> int:
        return self.depths.size

    def __len__(self):
        return self.depths.size

    def __eq__(self, other):
        if not isinstance(other, LayerScheme):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.depths, other.depths)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "depths": [float(x) for x in self.depths]}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerScheme":
        return cls(d["depths"], SchemeKind(d["kind"]))


@dataclass(frozen=True, eq=False)
class LayeredSeries:
    """Speeds indexed by (depth layer, time step).

    ``values`` has shape ``(n_layers, n_steps)``; column ``t`` is the
    layered profile at ``timestamps[t]``.
    """

    scheme: LayerScheme
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.int64).ravel()
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidInputError("series values must be a 2-D matrix")
        if v.shape[0] != self.scheme.n_layers:
            raise InvalidInputError(
                f"series has {v.shape[0]} rows but scheme has {self.scheme.n_layers} layers"
            )
        if v.shape[1] != ts.size or ts.size == 0:
            raise InvalidInputError("one non-empty timestamp per column required")
        if np.any(np.diff(ts) <= 0):
            raise InvalidInputError("series timestamps must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise NumericInputError("series contains non-finite values")
        object.__setattr__(self, "timestamps", _readonly(ts))
        object.__setattr__(self, "values", _readonly(v))

    @property
    def n_layers(self) -> int:
        return self.values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    def head(self, n: int) -> "LayeredSeries":
        """The first ``n`` time steps."""
        if not 1 <= n <= self.n_steps:
            raise InvalidInputError(f"cannot take {n} of {self.n_steps} steps")
        return LayeredSeries(self.scheme, self.timestamps[:n], self.values[:, :n])

    def step_seconds(self) -> int:
        """Typical spacing between consecutive timestamps (median)."""
        if self.n_steps < 2:
            raise InvalidInputError("cadence needs at least two time steps")
        return int(np.median(np.diff(self.timestamps)))

    def __eq__(self, other):
        if not isinstance(other, LayeredSeries):
            return NotImplemented
        return (
            self.scheme == other.scheme
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.values, other.values)
        )


def resample_profile(profile: SoundSpeedProfile, scheme: LayerScheme) -> np.ndarray:
    """Speed at each scheme depth by linear interpolation of the profile.

    Depths outside the sampled range take the nearest endpoint value.
    """
    if len(profile) == 0:
        raise InvalidInputError("empty profile")
    if len(profile) == 1:
        return np.full(scheme.n_layers, profile.speeds[0])
    return np.interp(scheme.depths, profile.depths, profile.speeds)


def build_series(profiles: Sequence[SoundSpeedProfile], scheme: LayerScheme) -> LayeredSeries:
    if len(profiles) < 2:
        raise InvalidInputError("need at least two profiles to build a series")
    ts = np.array([p.timestamp for p in profiles], dtype=np.int64)
    if np.any(np.diff(ts) <= 0):
        raise InvalidInputError("profile timestamps must be strictly increasing and unique")
    cols = [resample_profile(p, scheme) for p in profiles]
    return LayeredSeries(scheme, ts, np.column_stack(cols))


def interpolate_full_depth(
    layer_values: np.ndarray,
    scheme: LayerScheme,
    query_depths: np.ndarray,
    timestamp: int = 0,
) -> SoundSpeedProfile:
    """Assemble a full-depth profile from per-layer values."""
    v = np.asarray(layer_values, dtype=np.float64).ravel()
    if v.size != scheme.n_layers:
        raise InvalidInputError(
            f"{v.size} layer values for a {scheme.n_layers}-layer scheme"
        )
    q = np.asarray(query_depths, dtype=np.float64).ravel()
    if q.size == 0 or np.any(np.diff(q) <= 0):
        raise InvalidInputError("query depths must be non-empty and strictly increasing")
    return SoundSpeedProfile(timestamp, q, np.interp(q, scheme.depths, v))


def full_depth_grid(scheme: LayerScheme, spacing: float = 1.0) -> np.ndarray:
    """Uniform grid from the shallowest to the deepest scheme depth (inclusive)."""
    top, bottom = scheme.depths[0], scheme.depths[-1]
    n = int(np.floor((bottom - top) / spacing + 1e-9))
    grid = top + spacing * np.arange(n + 1)
    if grid[-1] < bottom:
        grid = np.append(grid, bottom)
    return grid


# --- file formats -----------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_profile_csv(path: str | os.PathLike, profile: SoundSpeedProfile) -> None:
    lines = [f"# timestamp={profile.timestamp}", CSV_HEADER]
    lines += [f"{_fmt(d)},{_fmt(s)}" for d, s in zip(profile.depths, profile.speeds)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_profile_csv(path: str | os.PathLike) -> SoundSpeedProfile:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    timestamp = None
    header_seen = False
    depths, speeds = [], []
    for lineno, raw in enumerate(text, 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            if key.strip() == "timestamp":
                try:
                    timestamp = int(val.strip())
                except ValueError:
                    raise InvalidInputError(f"{path}:{lineno}: bad timestamp {val!r}") from None
            continue
        if not header_seen:
            if line.replace(" ", "") != CSV_HEADER:
                raise InvalidInputError(f"{path}:{lineno}: expected header {CSV_HEADER!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise InvalidInputError(f"{path}:{lineno}: expected 2 columns")
        try:
            depths.append(float(parts[0]))
            speeds.append(float(parts[1]))
        except ValueError:
            raise InvalidInputError(f"{path}:{lineno}: non-numeric value") from None
    if timestamp is None:
        raise InvalidInputError(f"{path}: missing '# timestamp=' line")
    if not header_seen:
        raise InvalidInputError(f"{path}: missing header line")
    return SoundSpeedProfile(timestamp, depths, speeds)


def write_manifest(
    path: str | os.PathLike, scheme: LayerScheme, profile_paths: Sequence[str | os.PathLike]
) -> None:
    base = Path(path).resolve().parent
    rel = []
    for p in profile_paths:
        p = Path(p).resolve()
        try:
            rel.append(p.relative_to(base).as_posix())
        except ValueError:
            rel.append(p.as_posix())
    doc = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "scheme": scheme.to_dict(),
        "profiles": rel,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_manifest(path: str | os.PathLike) -> tuple[LayerScheme, list[SoundSpeedProfile]]:
    """Load the scheme and every profile listed by a manifest (in listed order)."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: manifest is not valid JSON ({exc})") from None
    if not isinstance(doc, dict) or doc.get("format") != MANIFEST_FORMAT:
        raise InvalidInputError(f"{path}: not an {MANIFEST_FORMAT} document")
    if doc.get("version") != MANIFEST_VERSION:
        raise InvalidInputError(f"{path}: unsupported manifest version {doc.get('version')!r}")
    try:
        scheme = LayerScheme.from_dict(doc["scheme"])
        entries = doc["profiles"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"{path}: malformed manifest ({exc})") from None
    profiles = []
    for entry in entries:
        p = Path(entry)
        if not p.is_absolute():
            p = path.parent / p
        profiles.append(read_profile_csv(p))
    return scheme, profiles


def load_series(path: str | os.PathLike) -> LayeredSeries:
    scheme, profiles = read_manifest(path)
    return build_series(profiles, scheme)
