import calendar

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssp_hlstm.errors import InvalidInputError
from ssp_hlstm.profile import load_series
from ssp_hlstm.synth import (
    ARGO_LEVELS,
    argo_mimic_spec,
    base_profile,
    experiment_mimic_spec,
    generate,
    timestamps,
    write_dataset,
)


def test_argo_mimic_shape_and_calendar():
    profiles, s = generate(argo_mimic_spec())
    assert s.values.shape == (58, 60) and len(profiles) == 60
    assert len(ARGO_LEVELS) == 58
    assert s.timestamps[0] == calendar.timegm((2017, 1, 1, 0, 0, 0))
    assert s.timestamps[48] == calendar.timegm((2021, 1, 1, 0, 0, 0))


def test_experiment_mimic_shape():
    _, s = generate(experiment_mimic_spec())
    assert s.values.shape == (36, 14)
    assert np.all(np.diff(s.timestamps) == 7200)


def test_constant_field_is_base_profile():
    spec = argo_mimic_spec(amplitude=0.0)
    _, s = generate(spec)
    base = base_profile(spec, spec.scheme.depths)
    for t in range(s.n_steps):
        np.testing.assert_array_equal(s.values[:, t], base)


def test_exact_periodicity():
    _, s = generate(argo_mimic_spec(phase=0.3, phase_lag=0.001))
    np.testing.assert_array_equal(s.values[:, 12:], s.values[:, :-12])


def test_spectral_recovery():
    spec = argo_mimic_spec()
    _, s = generate(spec)
    base = base_profile(spec, spec.scheme.depths)
    amp = spec.amplitude * np.exp(-spec.scheme.depths / spec.decay_depth)
    F = np.fft.rfft(s.values, axis=1)
    got_amp = 2 * np.abs(F[:, 60 // 12]) / 60
    np.testing.assert_allclose(s.values.mean(axis=1), base, rtol=0.01)
    np.testing.assert_allclose(got_amp, amp, rtol=0.01)
    assert abs(got_amp[0] - 5 * np.exp(-2.5 / 300)) < 1e-9


def test_noise_statistics():
    spec = argo_mimic_spec(noise=0.2, steps=600, rng_seed=3)
    _, noisy = generate(spec)
    _, clean = generate(argo_mimic_spec(steps=600))
    resid = noisy.values - clean.values
    assert abs(resid.std() - 0.2) < 0.01 and abs(resid.mean()) < 0.01


def test_seed_determinism():
    a = generate(argo_mimic_spec(noise=0.2, rng_seed=1))[1]
    assert a == generate(argo_mimic_spec(noise=0.2, rng_seed=1))[1]
    assert a != generate(argo_mimic_spec(noise=0.2, rng_seed=2))[1]


def test_trend():
    _, s = generate(argo_mimic_spec(amplitude=0.0, trend=0.1))
    np.testing.assert_allclose(np.diff(s.values, axis=1), 0.1, atol=1e-9)


def test_profile_depths_resample():
    spec = argo_mimic_spec(profile_depths=tuple(np.linspace(0, 2000, 201)), steps=3)
    profiles, s = generate(spec)
    assert len(profiles[0]) == 201 and s.n_layers == 58


@pytest.mark.parametrize("kw", [{"period": 1}, {"noise": -1}, {"steps": 1}, {"decay_depth": 0},
                                {"cadence": 0}])
def test_spec_validation(kw):
    with pytest.raises(InvalidInputError):
        argo_mimic_spec(**kw)


def test_write_dataset_round_trip(tmp_path):
    profiles, s = generate(argo_mimic_spec(noise=0.1))
    m = write_dataset(tmp_path, profiles, s.scheme)
    assert len(list(tmp_path.glob("profile_*.csv"))) == 60
    assert load_series(m) == s


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 10), st.floats(2, 30), st.floats(50, 1000), st.integers(0, 2**31))
def test_properties(amplitude, period, decay, seed):
    spec = argo_mimic_spec(amplitude=amplitude, period=period, decay_depth=decay, rng_seed=seed, steps=24)
    _, s = generate(spec)
    base = base_profile(spec, spec.scheme.depths)
    env = amplitude * np.exp(-spec.scheme.depths / decay)
    dev = np.abs(s.values - base[:, None])
    assert np.all(dev <= env[:, None] + 1e-9)
    assert np.all(np.diff(timestamps(spec)) > 0)
