import numpy as np
import pytest

from ssp_hlstm.profile import LayeredSeries, LayerScheme, SchemeKind


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sinusoid_series(n_layers=3, steps=20, amplitude=5.0, period=12, base=1500.0, start=0,
                    step=86400 * 30, depth_step=100.0, phase_step=0.7):
    """Per-layer noiseless sinusoids with distinct phases."""
    scheme = LayerScheme(depth_step * np.arange(n_layers), SchemeKind.EQUAL_INTERVAL)
    t = np.arange(steps)
    values = np.array([base + 3 * i + amplitude * np.sin(2 * np.pi * t / period + phase_step * i)
                       for i in range(n_layers)])
    ts = start + step * t
    return LayeredSeries(scheme, ts.astype(np.int64), values)


@pytest.fixture
def toy_series():
    return sinusoid_series()
