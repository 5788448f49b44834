"""Single-layer LSTM cell with a fully connected scalar head.

The cell follows the canonical gate equations::

    z   = [h_prev, x]
    f   = sigmoid(W_f z + b_f)
    i   = sigmoid(W_i z + b_i)
    C~  = tanh(W_C z + b_C)
    C   = f * C_prev + i * C~
    o   = sigmoid(W_o z + b_o)
    h   = o * tanh(C)

and a window of inputs is summarised by ``w_fc . h_T + b_fc``.
:func:`cell_forward` is a direct numpy transcription used for single steps;
:func:`sequence_forward` and :func:`backward` run on the compiled kernels
that training uses.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError, NumericInputError

GATES = ("f", "i", "C", "o")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LstmParams:
    """Packed gate weights plus the fully connected head.

    ``W`` stacks the forget, input, candidate and output gate matrices,
    each ``hidden x (hidden + input)``; the first ``hidden`` columns act on
    the recurrent state.
    """

    W: np.ndarray
    b: np.ndarray
    w_fc: np.ndarray
    b_fc: float

    def __post_init__(self):
        W = _frozen(self.W)
        b = _frozen(self.b).ravel()
        w_fc = _frozen(self.w_fc).ravel()
        if W.ndim != 2 or W.shape[0] % 4 or W.shape[0] == 0:
            raise InvalidInputError(f"W must be (4*hidden, hidden+input), got {W.shape}")
        H = W.shape[0] // 4
        if W.shape[1] <= H:
            raise InvalidInputError("W has no input columns")
        if b.shape != (4 * H,) or w_fc.shape != (H,):
            raise InvalidInputError("bias / head shapes inconsistent with W")
        b_fc = float(self.b_fc)
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))
                and np.all(np.isfinite(w_fc)) and np.isfinite(b_fc)):
            raise NumericInputError("parameters contain non-finite values")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "w_fc", w_fc)
        object.__setattr__(self, "b_fc", b_fc)

    @property
    def hidden_size(self) -> int:
        return self.W.shape[0] // 4

    @property
    def input_size(self) -> int:
        return self.W.shape[1] - self.hidden_size

    def _gate(self, name):
        H = self.hidden_size
        k = GATES.index(name)
        return slice(k * H, (k + 1) * H)

    W_f = property(lambda self: self.W[self._gate("f")])
    W_i = property(lambda self: self.W[self._gate("i")])
    W_C = property(lambda self: self.W[self._gate("C")])
    W_o = property(lambda self: self.W[self._gate("o")])
    b_f = property(lambda self: self.b[self._gate("f")])
    b_i = property(lambda self: self.b[self._gate("i")])
    b_C = property(lambda self: self.b[self._gate("C")])
    b_o = property(lambda self: self.b[self._gate("o")])

    @property
    def n_params(self) -> int:
        return self.W.size + self.b.size + self.w_fc.size + 1

    def flat(self) -> np.ndarray:
        """All parameters as one vector: W, b, w_fc, b_fc."""
        return np.concatenate([self.W.ravel(), self.b, self.w_fc, [self.b_fc]])

    @classmethod
    def from_flat(cls, theta: np.ndarray, hidden: int, input_size: int = 1):
        G, Z = 4 * hidden, hidden + input_size
        theta = np.asarray(theta, dtype=np.float64)
        if theta.size != G * Z + G + hidden + 1:
            raise InvalidInputError("flat vector length does not match sizes")
        c = G * Z
        return cls(theta[:c].reshape(G, Z), theta[c:c + G], theta[c + G:c + G + hidden], theta[-1])

    def fingerprint(self) -> int:
        return zlib.crc32(self.flat().tobytes())

    def arrays(self):
        """Mutable copies in kernel layout: (W, b, w_fc, b_fc[1])."""
        return (self.W.copy(), self.b.copy(), self.w_fc.copy(), np.array([self.b_fc]))

    def __eq__(self, other):
        if not isinstance(other, LstmParams):
            return NotImplemented
        return np.array_equal(self.flat(), other.flat()) and self.W.shape == other.W.shape


class Gradients(LstmParams):
    """Loss gradients, laid out exactly like :class:`LstmParams`."""


@dataclass(frozen=True, eq=False)
class LstmState:
    h: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "LstmState":
        return cls(np.zeros(hidden), np.zeros(hidden))


@dataclass(frozen=True, eq=False)
class StepRecord:
    z: np.ndarray
    f: np.ndarray
    i: np.ndarray
    C_tilde: np.ndarray
    o: np.ndarray
    C_prev: np.ndarray
    C: np.ndarray
    h: np.ndarray


@dataclass(frozen=True, eq=False)
class ForwardCache:
    """Per-step activations of one window, in kernel workspace layout."""

    x: np.ndarray
    zs: np.ndarray
    acts: np.ndarray
    cs: np.ndarray
    tcs: np.ndarray
    hs: np.ndarray
    params_fingerprint: int
    hidden_size: int

    def __len__(self):
        return self.x.shape[0]

    def step(self, t: int) -> StepRecord:
        H = self.hidden_size
        a = self.acts[t]
        return StepRecord(
            z=self.zs[t], f=a[:H], i=a[H:2 * H], C_tilde=a[2 * H:3 * H], o=a[3 * H:],
            C_prev=self.cs[t], C=self.cs[t + 1], h=self.hs[t + 1],
        )


def init_params(hidden: int, input_size: int = 1, rng_seed: int = 0) -> LstmParams:
    """Gate and head weights ~ U(-1/sqrt(hidden), 1/sqrt(hidden)); biases zero."""
    if hidden < 1 or input_size < 1:
        raise InvalidInputError("hidden and input sizes must be >= 1")
    rng = np.random.default_rng(rng_seed)
    bound = 1.0 / np.sqrt(hidden)
    W = rng.uniform(-bound, bound, size=(4 * hidden, hidden + input_size))
    w_fc = rng.uniform(-bound, bound, size=hidden)
    return LstmParams(W, np.zeros(4 * hidden), w_fc, 0.0)


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def cell_forward(params: LstmParams, state: LstmState, x) -> tuple[LstmState, StepRecord]:
    """One step of the cell (plain numpy)."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape != (params.input_size,):
        raise InvalidInputError(f"expected input of size {params.input_size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(state.h)) and np.all(np.isfinite(state.C))):
        raise NumericInputError("non-finite input or state")
    z = np.concatenate([state.h, x])
    f = _sigmoid(params.W_f @ z + params.b_f)
    i = _sigmoid(params.W_i @ z + params.b_i)
    C_tilde = np.tanh(params.W_C @ z + params.b_C)
    C = f * state.C + i * C_tilde
    o = _sigmoid(params.W_o @ z + params.b_o)
    h = o * np.tanh(C)
    rec = StepRecord(z, f, i, C_tilde, o, state.C, C, h)
    return LstmState(h, C), rec


def head(params: LstmParams, h: np.ndarray) -> float:
    return float(params.w_fc @ h + params.b_fc)


def _as_window(window, input_size: int) -> np.ndarray:
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] != input_size:
        raise InvalidInputError("window must be non-empty with one input vector per step")
    if not np.all(np.isfinite(x)):
        raise NumericInputError("window contains non-finite values")
    return np.ascontiguousarray(x)


def sequence_forward(params: LstmParams, window) -> tuple[float, ForwardCache]:
    """Run the window in time order from a zero state and apply the head."""
    x = _as_window(window, params.input_size)
    T = x.shape[0]
    H = params.hidden_size
    G, Z = params.W.shape
    zs = np.zeros((T, Z))
    acts = np.zeros((T, G))
    cs = np.zeros((T + 1, H))
    tcs = np.zeros((T, H))
    hs = np.zeros((T + 1, H))
    pred = kernels.lstm_forward(
        params.W, params.b, params.w_fc, np.array([params.b_fc]), x, zs, acts, cs, tcs, hs
    )
    return float(pred), ForwardCache(x, zs, acts, cs, tcs, hs, params.fingerprint(), H)


def predict_window(params: LstmParams, window) -> float:
    x = _as_window(window, params.input_size)
    return float(kernels.lstm_predict(params.W, params.b, params.w_fc, np.array([params.b_fc]), x))


def backward(params: LstmParams, cache: ForwardCache, d_prediction: float) -> Gradients:
    """Gradient of ``d_prediction * prediction`` w.r.t. every parameter (BPTT)."""
    if cache.hidden_size != params.hidden_size or cache.params_fingerprint != params.fingerprint():
        raise InvalidInputError("forward cache was produced with different parameters")
    G, Z = params.W.shape
    T = len(cache)
    da = np.zeros((T, G))
    dwfc = np.zeros(params.hidden_size)
    kernels.lstm_backward(
        params.W, params.w_fc, cache.zs, cache.acts, cache.cs, cache.tcs, cache.hs,
        float(d_prediction), da, dwfc,
    )
    dW = np.zeros((G, Z))
    db = np.zeros(G)
    kernels.weight_grads(da, cache.zs, dW, db)
    return Gradients(dW, db, dwfc, float(d_prediction))


LOSS_KINDS = ("squared_error", "prediction")


def _loss(pred: float, loss_kind: str, target: float) -> tuple[float, float]:
    """(loss, dloss/dpred)"""
    if loss_kind == "squared_error":
        r = pred - target
        return r * r, 2.0 * r
    return pred, 1.0


def _naive_differences(params, x, loss_kind, target, epsilon):
    W, b, w_fc, b_fc = params.arrays()
    g_n = np.empty(params.n_params)
    c = 0
    for v in (W.reshape(-1), b, w_fc, b_fc):
        for k in range(v.size):
            orig = v[k]
            v[k] = orig + epsilon
            lp = _loss(kernels.lstm_predict(W, b, w_fc, b_fc, x), loss_kind, target)[0]
            v[k] = orig - epsilon
            lm = _loss(kernels.lstm_predict(W, b, w_fc, b_fc, x), loss_kind, target)[0]
            v[k] = orig
            g_n[c] = (lp - lm) / (2.0 * epsilon)
            c += 1
    return g_n


def _dsigmoid_diff(a, da):
    """sigmoid(a + da) - sigmoid(a) without cancellation."""
    u = np.exp(-a)
    return -u * np.expm1(-da) / ((1.0 + u) * (1.0 + u * np.exp(-da)))


def _dtanh_diff(a, da):
    """tanh(a + da) - tanh(a) without cancellation."""
    return np.sinh(da) / (np.cosh(a) * np.cosh(a + da))


def _central_differences(params, x, loss_kind, target, epsilon, chunk=1024):
    """Central differences (L(p+e) - L(p-e)) / (2e) for every parameter.

    The two perturbed forward passes run side by side: the minus trajectory
    is carried explicitly and the plus trajectory as its difference, updated
    with exact difference identities (products, expm1 for sigmoid,
    sinh/cosh for tanh). The result is the same quotient as two separate
    passes but is not swamped by rounding when a gradient is many orders
    of magnitude smaller than the loss.
    """
    H = params.hidden_size
    G, Z = params.W.shape
    theta = params.flat()
    n_w, n_b = G * Z, G
    out = np.empty(theta.size)
    T = x.shape[0]
    for start in range(0, theta.size, chunk):
        idx = np.arange(start, min(start + chunk, theta.size))
        B = idx.size
        rows = np.arange(B)
        tp = theta[idx] + epsilon
        tm = theta[idx] - epsilon
        step = tp - tm
        off_m = tm - theta[idx]
        is_w = idx < n_w
        is_b = (idx >= n_w) & (idx < n_w + n_b)
        is_fc = (idx >= n_w + n_b) & (idx < theta.size - 1)
        is_bfc = idx == theta.size - 1
        wr, wc = np.divmod(idx[is_w], Z)
        br = idx[is_b] - n_w
        fk = idx[is_fc] - n_w - n_b

        h = np.zeros((B, H))
        C = np.zeros((B, H))
        dh = np.zeros((B, H))
        dC = np.zeros((B, H))
        for t in range(T):
            z = np.concatenate([h, np.broadcast_to(x[t], (B, x.shape[1]))], axis=1)
            dz = np.concatenate([dh, np.zeros((B, x.shape[1]))], axis=1)
            a = z @ params.W.T + params.b
            da = dz @ params.W.T
            rw = rows[is_w]
            a[rw, wr] += off_m[is_w] * z[rw, wc]
            da[rw, wr] += off_m[is_w] * dz[rw, wc] + step[is_w] * (z[rw, wc] + dz[rw, wc])
            rb = rows[is_b]
            a[rb, br] += off_m[is_b]
            da[rb, br] += step[is_b]

            sl = [slice(k * H, (k + 1) * H) for k in range(4)]
            f, i, o = (1.0 / (1.0 + np.exp(-a[:, s])) for s in (sl[0], sl[1], sl[3]))
            df, di, do = (_dsigmoid_diff(a[:, s], da[:, s]) for s in (sl[0], sl[1], sl[3]))
            g = np.tanh(a[:, sl[2]])
            dg = _dtanh_diff(a[:, sl[2]], da[:, sl[2]])

            C_new = f * C + i * g
            dC_new = df * (C + dC) + f * dC + di * (g + dg) + i * dg
            tc = np.tanh(C_new)
            dtc = _dtanh_diff(C_new, dC_new)
            h = o * tc
            dh = do * (tc + dtc) + o * dtc
            C, dC = C_new, dC_new

        pred = h @ params.w_fc + params.b_fc
        dpred = dh @ params.w_fc
        rf = rows[is_fc]
        pred[rf] += off_m[is_fc] * h[rf, fk]
        dpred[rf] += off_m[is_fc] * dh[rf, fk] + step[is_fc] * (h[rf, fk] + dh[rf, fk])
        pred[is_bfc] += off_m[is_bfc]
        dpred[is_bfc] += step[is_bfc]

        if loss_kind == "squared_error":
            r = pred - target
            dloss = dpred * (2.0 * r + dpred)
        else:
            dloss = dpred
        out[idx] = dloss / step
    return out


def gradient_check(
    params: LstmParams,
    window,
    loss_kind: str = "squared_error",
    epsilon: float = 1e-5,
    target: float = 0.0,
    analytic: Gradients | None = None,
    naive: bool = False,
) -> float:
    """Worst relative error between BPTT and central finite differences.

    Every parameter is perturbed by +/- ``epsilon`` and the loss difference
    is compared with the analytic gradient using
    ``|g_a - g_n| / max(|g_a|, |g_n|, 1e-12)``.

    By default the perturbed losses are differenced with
    :func:`_central_differences`; ``naive=True`` subtracts two independently
    rounded forward passes instead, whose noise floor (~1e-11 absolute)
    exceeds some genuinely tiny gradient entries. ``analytic`` replaces the
    computed BPTT gradient, e.g. to inject a faulty one.
    """
    if epsilon <= 0:
        raise InvalidInputError("epsilon must be positive")
    if loss_kind not in LOSS_KINDS:
        raise InvalidInputError(f"loss_kind must be one of {LOSS_KINDS}")
    x = _as_window(window, params.input_size)
    if analytic is None:
        pred, cache = sequence_forward(params, x)
        _, dl = _loss(pred, loss_kind, target)
        analytic = backward(params, cache, dl)
    g_a = analytic.flat()
    if naive:
        g_n = _naive_differences(params, x, loss_kind, target, epsilon)
    else:
        g_n = _central_differences(params, x, loss_kind, target, epsilon)
    denom = np.maximum(np.maximum(np.abs(g_a), np.abs(g_n)), 1e-12)
    return float(np.max(np.abs(g_a - g_n) / denom))
