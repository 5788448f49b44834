import math

import numpy as np
import pytest

from ssp_hlstm.errors import InvalidInputError, NumericInputError
from ssp_hlstm.lstm import (
    Gradients,
    LstmParams,
    LstmState,
    backward,
    cell_forward,
    gradient_check,
    head,
    init_params,
    predict_window,
    sequence_forward,
)


def zero_params(hidden, input_size=1):
    return LstmParams(np.zeros((4 * hidden, hidden + input_size)), np.zeros(4 * hidden),
                      np.zeros(hidden), 0.0)


def random_params(rng, hidden, input_size=1, scale=0.5):
    return LstmParams(scale * rng.standard_normal((4 * hidden, hidden + input_size)),
                      scale * rng.standard_normal(4 * hidden),
                      scale * rng.standard_normal(hidden), float(rng.standard_normal()))


def scalar_cell(W, b, h, C, x):
    """Gate formulas one unit at a time, with math functions only."""
    H = len(h)
    z = list(h) + list(x)
    sig = lambda a: 1.0 / (1.0 + math.exp(-a))
    dot = lambda row: sum(W[row][k] * z[k] for k in range(len(z))) + b[row]
    h_new, C_new = [], []
    for j in range(H):
        f = sig(dot(j))
        i = sig(dot(H + j))
        ct = math.tanh(dot(2 * H + j))
        o = sig(dot(3 * H + j))
        c = f * C[j] + i * ct
        C_new.append(c)
        h_new.append(o * math.tanh(c))
    return np.array(h_new), np.array(C_new)


def test_init_shapes_and_determinism():
    p = init_params(128, 1, 3)
    assert p.W_i.shape == (128, 129) and p.W.shape == (512, 129)
    assert p.n_params == 512 * 129 + 512 + 128 + 1
    assert init_params(128, 1, 3) == p
    assert init_params(128, 1, 4) != p
    assert np.all(p.b == 0) and p.b_fc == 0


def test_init_mean_within_three_sigma():
    # 4*H*(H+1) + H entries for H = 158 is just over 1e5 draws
    p = init_params(158, 1, 0)
    draws = np.concatenate([p.W.ravel(), p.w_fc])
    assert draws.size >= 100_000
    bound = 1 / np.sqrt(158)
    sigma = bound / np.sqrt(3) / np.sqrt(draws.size)
    assert abs(draws.mean()) < 3 * sigma
    assert np.all(np.abs(draws) <= bound)


def test_cell_all_zero_params():
    p = zero_params(4)
    s, rec = cell_forward(p, LstmState.zeros(4), [0.7])
    assert np.all(s.C == 0) and np.all(s.h == 0)
    np.testing.assert_array_equal(rec.f, 0.5)
    np.testing.assert_array_equal(rec.C_tilde, 0.0)
    c = np.array([1.0, -2.0, 0.3, 4.0])
    s, _ = cell_forward(p, LstmState(np.zeros(4), c), [-3.0])
    np.testing.assert_array_equal(s.C, 0.5 * c)
    np.testing.assert_array_equal(s.h, 0.5 * np.tanh(0.5 * c))


def test_cell_matches_scalar_transcription(rng):
    for H in (1, 3, 7):
        for _ in range(10):
            p = random_params(rng, H, 2)
            st = LstmState(np.tanh(rng.standard_normal(H)), rng.standard_normal(H))
            x = rng.standard_normal(2)
            s, _ = cell_forward(p, st, x)
            h, C = scalar_cell(p.W.tolist(), p.b.tolist(), st.h, st.C, x)
            np.testing.assert_allclose(s.h, h, atol=1e-12, rtol=0)
            np.testing.assert_allclose(s.C, C, atol=1e-12, rtol=0)
            assert np.all(np.abs(s.h) <= 1)


def test_cell_rejects_bad_input():
    p = zero_params(2)
    with pytest.raises(InvalidInputError):
        cell_forward(p, LstmState.zeros(2), [1.0, 2.0])
    with pytest.raises(NumericInputError):
        cell_forward(p, LstmState.zeros(2), [np.nan])


def test_sequence_zero_params():
    pred, _ = sequence_forward(zero_params(5), np.arange(6.0))
    assert pred == 0.0


def test_sequence_base_case(rng):
    p = random_params(rng, 6)
    s, _ = cell_forward(p, LstmState.zeros(6), [0.4])
    pred, _ = sequence_forward(p, [0.4])
    assert abs(pred - head(p, s.h)) <= 1e-12


def test_sequence_composition(rng):
    for _ in range(5):
        p = random_params(rng, 8)
        x = rng.random(12)
        s = LstmState.zeros(8)
        for v in x:
            s, _ = cell_forward(p, s, [v])
        pred, cache = sequence_forward(p, x)
        assert abs(pred - head(p, s.h)) <= 1e-12
        np.testing.assert_allclose(cache.step(11).h, s.h, atol=1e-12, rtol=0)
        assert abs(predict_window(p, x) - pred) <= 1e-12


def test_sequence_is_order_sensitive(rng):
    p = random_params(rng, 8)
    x = rng.random(12)
    assert predict_window(p, x) != predict_window(p, x[::-1])


def test_backward_linearity_and_head_bias(rng):
    p = random_params(rng, 4)
    _, cache = sequence_forward(p, rng.random(5))
    g0 = backward(p, cache, 0.0)
    assert np.all(g0.flat() == 0)
    g = backward(p, cache, 1.7)
    assert isinstance(g, Gradients) and g.b_fc == 1.7
    np.testing.assert_allclose(backward(p, cache, 3.4).flat(), 2 * g.flat(), rtol=1e-14, atol=0)


def test_backward_rejects_stale_cache(rng):
    p = random_params(rng, 4)
    _, cache = sequence_forward(p, rng.random(5))
    with pytest.raises(InvalidInputError):
        backward(random_params(rng, 4), cache, 1.0)


@pytest.mark.parametrize("hidden", [2, 8, 32])
@pytest.mark.parametrize("loss_kind", ["squared_error", "prediction"])
def test_gradient_check_random(hidden, loss_kind, rng):
    for s in range(3):
        p = init_params(hidden, 1, s)
        assert gradient_check(p, rng.random(7), loss_kind, target=rng.random()) < 1e-4


def test_gradient_check_spec_cases(rng):
    assert gradient_check(init_params(2, 1, 0), rng.random(3)) < 1e-4
    assert gradient_check(init_params(8, 1, 0), rng.random(12)) < 1e-4


def test_gradient_check_zero_params():
    assert gradient_check(zero_params(3), [0.2, 0.5, 0.9], target=0.3) < 1e-6


def test_gradient_check_large_weights(rng):
    # saturated gates exercise the tiny-gradient regime
    assert gradient_check(random_params(rng, 8, scale=2.0), rng.random(12)) < 1e-4


def test_naive_differences_agree_when_well_conditioned(rng):
    p = random_params(rng, 3)
    x = rng.random(4)
    assert gradient_check(p, x, "prediction", epsilon=1e-5, naive=True) < 1e-3


def test_gradient_check_detects_fault(rng):
    p = init_params(4, 1, 0)
    x = rng.random(5)
    pred, cache = sequence_forward(p, x)
    g = backward(p, cache, 2 * pred)
    W, b, w_fc, b_fc = g.arrays()
    b[0] += 0.1
    assert gradient_check(p, x, analytic=Gradients(W, b, w_fc, b_fc[0])) > 1e-2


def test_params_flat_round_trip(rng):
    p = random_params(rng, 5, 2)
    q = LstmParams.from_flat(p.flat(), 5, 2)
    assert q == p and q.fingerprint() == p.fingerprint()
    with pytest.raises(InvalidInputError):
        LstmParams.from_flat(p.flat()[:-1], 5, 2)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        LstmParams(np.zeros((8, 3)), np.zeros(8), np.zeros(3), 0.0)
    with pytest.raises(NumericInputError):
        LstmParams(np.full((8, 3), np.inf), np.zeros(8), np.zeros(2), 0.0)
