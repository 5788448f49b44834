import json

import numpy as np
import pytest

from ssp_hlstm.errors import InvalidInputError
from ssp_hlstm.profile import (
    DepthSample,
    LayeredSeries,
    LayerScheme,
    SchemeKind,
    SoundSpeedProfile,
    build_series,
    full_depth_grid,
    interpolate_full_depth,
    load_series,
    read_manifest,
    read_profile_csv,
    resample_profile,
    write_manifest,
    write_profile_csv,
)
from ssp_hlstm.synth import argo_mimic_spec, argo_scheme, generate


def brute_interp(x, xp, fp):
    """Segment search, written without np.interp."""
    out = []
    for q in x:
        if q <= xp[0]:
            out.append(fp[0])
            continue
        if q >= xp[-1]:
            out.append(fp[-1])
            continue
        for k in range(len(xp) - 1):
            if xp[k] <= q <= xp[k + 1]:
                w = (q - xp[k]) / (xp[k + 1] - xp[k])
                out.append(fp[k] + w * (fp[k + 1] - fp[k]))
                break
    return np.array(out)


def two_point():
    return SoundSpeedProfile(0, [0.0, 10.0], [1500.0, 1510.0])


def test_resample_midpoint_and_clamp():
    p = two_point()
    assert resample_profile(p, LayerScheme([5.0, 6.0]))[0] == 1505.0
    assert resample_profile(p, LayerScheme([20.0, 30.0]))[0] == 1510.0


def test_resample_matches_brute_force(rng):
    scheme = argo_scheme()
    for _ in range(20):
        knots = np.sort(rng.choice(np.arange(0, 2500, 0.5), size=30, replace=False))
        p = SoundSpeedProfile(0, knots, 1480 + 40 * rng.random(30))
        got = resample_profile(p, scheme)
        np.testing.assert_allclose(got, brute_interp(scheme.depths, p.depths, p.speeds), atol=1e-12, rtol=0)


def test_build_series_definition():
    scheme = LayerScheme([0.0, 5.0, 10.0])
    a = two_point()
    b = SoundSpeedProfile(10, [0.0, 10.0], [1490.0, 1530.0])
    s = build_series([a, b], scheme)
    assert s.values.shape == (3, 2)
    np.testing.assert_array_equal(s.values[:, 0], resample_profile(a, scheme))
    np.testing.assert_array_equal(s.values[:, 1], resample_profile(b, scheme))


def test_build_series_needs_two_profiles():
    with pytest.raises(InvalidInputError):
        build_series([two_point()], LayerScheme([0.0, 1.0]))


def test_build_series_cellwise_on_synthetic(rng):
    spec = argo_mimic_spec(profile_depths=tuple(np.linspace(0, 2000, 81)), noise=0.1)
    profiles, series = generate(spec)
    assert series.values.shape == (58, 60)
    for _ in range(200):
        i, t = rng.integers(58), rng.integers(60)
        assert series.values[i, t] == resample_profile(profiles[t], spec.scheme)[i]


def test_build_series_rejects_unordered_timestamps():
    a, b = two_point(), SoundSpeedProfile(0, [0.0, 10.0], [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        build_series([a, b], LayerScheme([0.0, 1.0]))


def test_interpolate_full_depth_cases(rng):
    scheme = LayerScheme([0.0, 100.0])
    assert interpolate_full_depth([1500, 1520], scheme, [50.0]).speeds[0] == 1510.0
    s = argo_scheme()
    v = 1480 + 40 * rng.random(58)
    np.testing.assert_array_equal(interpolate_full_depth(v, s, s.depths).speeds, v)


def test_interpolate_full_depth_brute_force(rng):
    s = argo_scheme()
    grid = full_depth_grid(s)
    assert grid[0] == s.depths[0] and grid[-1] == s.depths[-1]
    for _ in range(5):
        v = 1480 + 40 * rng.random(58)
        got = interpolate_full_depth(v, s, grid, 7)
        assert got.timestamp == 7
        np.testing.assert_allclose(got.speeds, brute_interp(grid, s.depths, v), atol=1e-12, rtol=0)


def test_interpolate_full_depth_validates():
    s = LayerScheme([0.0, 100.0])
    with pytest.raises(InvalidInputError):
        interpolate_full_depth([1500.0], s, [1.0])
    with pytest.raises(InvalidInputError):
        interpolate_full_depth([1500.0, 1501.0], s, [5.0, 1.0])


def test_full_depth_grid_spacing():
    g = full_depth_grid(LayerScheme([2.5, 10.0]), 1.0)
    assert g[0] == 2.5 and g[-1] == 10.0
    assert np.all(np.diff(g) <= 1.0)


@pytest.mark.parametrize("depths,speeds", [
    ([0.0, 0.0], [1500.0, 1501.0]),
    ([0.0, -1.0], [1500.0, 1501.0]),
    ([0.0, 1.0], [1500.0, -1.0]),
    ([0.0, 1.0], [1500.0, np.nan]),
    ([0.0, 1.0], [1500.0]),
])
def test_profile_validation(depths, speeds):
    with pytest.raises(InvalidInputError):
        SoundSpeedProfile(0, depths, speeds)


def test_profile_is_immutable():
    p = two_point()
    with pytest.raises(ValueError):
        p.speeds[0] = 1.0


def test_depth_samples_round_trip():
    p = two_point()
    assert SoundSpeedProfile.from_samples(0, p.samples) == p
    with pytest.raises(InvalidInputError):
        DepthSample(-1.0, 1500.0)


def test_scheme_validation():
    with pytest.raises(InvalidInputError):
        LayerScheme([1.0])
    with pytest.raises(InvalidInputError):
        LayerScheme([0.0, 2.0, 1.0])
    with pytest.raises(InvalidInputError):
        LayerScheme([0.0, 1.0, 3.0], SchemeKind.EQUAL_INTERVAL)
    s = LayerScheme.equal_interval(0, 3500, 36)
    assert s.n_layers == 36 and s.kind is SchemeKind.EQUAL_INTERVAL
    assert LayerScheme.from_dict(s.to_dict()) == s


def test_series_head_and_step():
    s = LayeredSeries(LayerScheme([0.0, 1.0]), [0, 10, 20], np.ones((2, 3)))
    assert s.head(2).n_steps == 2
    assert s.step_seconds() == 10


def test_profile_csv_round_trip(tmp_path, rng):
    p = SoundSpeedProfile(1488326400, np.sort(rng.random(10)) * 1000, 1500 + rng.random(10))
    path = tmp_path / "p.csv"
    write_profile_csv(path, p)
    text = path.read_text().splitlines()
    assert text[0] == "# timestamp=1488326400" and text[1] == "depth_m,speed_mps"
    assert read_profile_csv(path) == p


@pytest.mark.parametrize("body", [
    "depth_m,speed_mps\n0,1500\n",
    "# timestamp=0\n0,1500\n",
    "# timestamp=0\ndepth_m,speed_mps\n0,abc\n",
    "# timestamp=x\ndepth_m,speed_mps\n0,1500\n",
    "# timestamp=0\ndepth_m,speed_mps\n0,1500,3\n",
])
def test_profile_csv_errors(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(InvalidInputError):
        read_profile_csv(path)


def test_manifest_round_trip(tmp_path):
    profiles, series = generate(argo_mimic_spec(steps=5))
    paths = []
    for k, p in enumerate(profiles):
        paths.append(tmp_path / f"p{k}.csv")
        write_profile_csv(paths[-1], p)
    write_manifest(tmp_path / "m.json", series.scheme, paths)
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["profiles"][0] == "p0.csv"
    scheme, back = read_manifest(tmp_path / "m.json")
    assert scheme == series.scheme and back == profiles
    assert load_series(tmp_path / "m.json") == series


@pytest.mark.parametrize("doc", ["{", '{"format": "x"}', '{"format": "ssp-manifest", "version": 9}',
                                 '{"format": "ssp-manifest", "version": 1}'])
def test_manifest_errors(tmp_path, doc):
    (tmp_path / "m.json").write_text(doc)
    with pytest.raises(InvalidInputError):
        read_manifest(tmp_path / "m.json")
