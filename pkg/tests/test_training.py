import csv
import math

import numpy as np
import pytest

from ssp_hlstm.errors import InvalidInputError, NumericInputError
from ssp_hlstm.lstm import predict_window
from ssp_hlstm.training import (
    TrainConfig,
    default_window_length,
    epoch_order,
    layer_seed,
    make_windows,
    rmse,
    train_layer,
    write_loss_history,
)

SMALL = TrainConfig(hidden_size=8, epochs=40, window_length=4)


def test_make_windows_definition():
    w, t = make_windows([1.0, 2.0, 3.0, 4.0], 2)
    np.testing.assert_array_equal(w, [[1, 2], [2, 3]])
    np.testing.assert_array_equal(t, [3, 4])
    assert make_windows(np.arange(48.0), 12)[0].shape == (36, 12)


def test_make_windows_reconstruction(rng):
    for _ in range(20):
        n = int(rng.integers(2, 40))
        w = int(rng.integers(1, n))
        row = rng.random(n)
        windows, targets = make_windows(row, w)
        rebuilt = np.concatenate([windows[0], targets])
        np.testing.assert_array_equal(rebuilt, row)
        for k in range(len(targets)):
            np.testing.assert_array_equal(windows[k], row[k:k + w])


def test_make_windows_too_short():
    with pytest.raises(InvalidInputError):
        make_windows([1.0, 2.0], 2)


def test_rmse_cases(rng):
    assert rmse([1, 2], [1, 2]) == 0
    assert abs(rmse([1, 2], [0, 0]) - math.sqrt(2.5)) < 1e-15
    for _ in range(20):
        p, a = rng.random(9), rng.random(9)
        acc = 0.0
        for x, y in zip(p, a):
            acc += (x - y) ** 2
        assert abs(rmse(p, a) - math.sqrt(acc / 9)) < 1e-12
        assert rmse(p, a) == rmse(a, p)
        assert abs(rmse(-3 * p, -3 * a) - 3 * rmse(p, a)) < 1e-12
    with pytest.raises(InvalidInputError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(InvalidInputError):
        rmse([], [])


def test_zero_learning_rate_is_identity():
    row = np.sin(np.arange(20) / 3) * 0.5 + 0.5
    for opt in ("adam", "sgd"):
        run = train_layer(row, TrainConfig(hidden_size=6, epochs=5, window_length=4,
                                           learning_rate=0.0, optimizer=opt))
        assert run.params == run.initial_params


def test_ramp_improves():
    row = np.linspace(0, 1, 30)
    run = train_layer(row, TrainConfig(hidden_size=16, window_length=4))
    assert len(run.history) == 300
    assert run.final_loss < run.history[0]


def test_sgd_ramp_improves():
    row = np.linspace(0, 1, 30)
    run = train_layer(row, TrainConfig(hidden_size=16, window_length=4, optimizer="sgd", learning_rate=0.05))
    assert run.final_loss < run.history[0]


def test_determinism_and_seed_sensitivity():
    row = np.sin(np.arange(30) / 2) * 0.5 + 0.5
    a = train_layer(row, SMALL, 3)
    b = train_layer(row, SMALL, 3)
    np.testing.assert_array_equal(a.history, b.history)
    assert a.params == b.params
    assert train_layer(row, SMALL, 4).params != a.params


def test_shuffle_changes_trajectory():
    row = np.sin(np.arange(30) / 2) * 0.5 + 0.5
    a = train_layer(row, SMALL)
    b = train_layer(row, TrainConfig(hidden_size=8, epochs=40, window_length=4, shuffle=True))
    assert not np.array_equal(a.history, b.history)
    order = epoch_order(5, 3, True, 0)
    assert all(sorted(r) == list(range(5)) for r in order)


def test_sinusoid_one_step():
    """Noiseless period-12 sinusoid, 48 samples, w=12: one-step RMSE < 0.05."""
    t = np.arange(60)
    row = 0.5 + 0.5 * np.sin(2 * np.pi * t / 12)
    run = train_layer(row[:48], TrainConfig(hidden_size=32))
    preds = [predict_window(run.params, row[k - 12:k]) for k in range(48, 60)]
    assert rmse(preds, row[48:]) < 0.05


def test_divergence_is_reported():
    row = np.linspace(0, 1, 20)
    with pytest.raises(NumericInputError):
        train_layer(row, TrainConfig(hidden_size=4, epochs=50, window_length=4,
                                     optimizer="sgd", learning_rate=1e200))
    with pytest.raises(NumericInputError):
        train_layer(np.array([0.0, np.nan, 1.0, 2.0, 3.0, 4.0]), SMALL)


def test_config_validation_and_round_trip():
    with pytest.raises(InvalidInputError):
        TrainConfig(hidden_size=0)
    with pytest.raises(InvalidInputError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(optimizer="rmsprop")
    c = TrainConfig(hidden_size=3, optimizer="sgd")
    assert TrainConfig.from_dict(c.to_dict()) == c


def test_default_window_length():
    assert default_window_length(np.arange(5) * 30 * 86400) == 12
    assert default_window_length(np.arange(14) * 7200) == 4


def test_layer_seed_is_stable():
    assert layer_seed(0, 1) == layer_seed(0, 1)
    assert len({layer_seed(0, i) for i in range(100)}) == 100
    assert layer_seed(0, 1) != layer_seed(1, 1)


def test_loss_history_csv(tmp_path):
    write_loss_history(tmp_path / "h.csv", [0.5, 0.25])
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows == [["epoch", "mean_loss"], ["1", "0.5"], ["2", "0.25"]]
