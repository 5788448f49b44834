"""Compiled inner loops (numba).

Array conventions shared with :mod:`._numpy`:

* ``W`` is ``(4H, H + I)``; row blocks are the forget, input, candidate and
  output gates; the first ``H`` columns multiply the previous hidden state
  and the last ``I`` the input.
* ``b`` is ``(4H,)``, ``wfc`` is ``(H,)`` and ``bfc`` a length-1 array so the
  training loop can update it in place.
* Per-window workspaces: ``zs (T, H+I)`` gate inputs, ``acts (T, 4H)`` gate
  activations, ``cs (T+1, H)`` cell states, ``tcs (T, H)`` tanh of the cell
  state, ``hs (T+1, H)`` hidden states. Row 0 of ``cs``/``hs`` is the zero
  initial state.

Sigmoid and tanh go through :func:`vexp`, a branch-free exp that LLVM can
vectorise; libm ``exp`` cannot be vectorised without SVML and otherwise
dominates the forward pass.
"""

import math

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True, error_model="numpy", fastmath={"reassoc", "contract"})

_LOG2E = 1.4426950408889634
_LN2_HI = 6.93147180369123816490e-01
_LN2_LO = 1.90821492927058770002e-10


@njit(**_OPTS)
def vexp(x, out, ibuf):
    """out[:n] = exp(x[:n]) with n = x.size; max relative error ~2 ulp.

    Inputs are clamped to [-708, 709]. ``ibuf`` is int64 scratch of at
    least the same length.
    """
    n = x.shape[0]
    for j in range(n):
        v = min(max(x[j], -708.0), 709.0)
        k = math.floor(v * _LOG2E + 0.5)
        r = v - k * _LN2_HI - k * _LN2_LO
        # Taylor to degree 13 on |r| <= ln2/2: truncation below 1e-17
        p = 1.0 / 6227020800.0
        p = p * r + 1.0 / 479001600.0
        p = p * r + 1.0 / 39916800.0
        p = p * r + 1.0 / 3628800.0
        p = p * r + 1.0 / 362880.0
        p = p * r + 1.0 / 40320.0
        p = p * r + 1.0 / 5040.0
        p = p * r + 1.0 / 720.0
        p = p * r + 1.0 / 120.0
        p = p * r + 1.0 / 24.0
        p = p * r + 1.0 / 6.0
        p = p * r + 0.5
        p = p * r + 1.0
        p = p * r + 1.0
        out[j] = p
        ibuf[j] = (np.int64(k) + 1023) << 52
    scale = ibuf[:n].view(np.float64)
    for j in range(n):
        out[j] *= scale[j]


@njit(**_OPTS)
def lstm_forward(W, b, wfc, bfc, x, zs, acts, cs, tcs, hs):
    """Run the cell over ``x`` (T, I) from a zero state; return the head output."""
    G, Z = W.shape
    H = G // 4
    I = Z - H
    T = x.shape[0]
    pre = np.empty(G)
    ex = np.empty(G)
    ibuf = np.empty(G, dtype=np.int64)
    for k in range(H):
        hs[0, k] = 0.0
        cs[0, k] = 0.0
    for t in range(T):
        for k in range(H):
            zs[t, k] = hs[t, k]
        for q in range(I):
            zs[t, H + q] = x[t, q]
        for j in range(G):
            s = b[j]
            for q in range(I):
                s += W[j, H + q] * x[t, q]
            pre[j] = s
        if t > 0:
            # four rows per pass share each h load; the loop is L2-bandwidth bound
            hp = hs[t]
            for j in range(0, G, 4):
                a0 = 0.0
                a1 = 0.0
                a2 = 0.0
                a3 = 0.0
                for k in range(H):
                    hk = hp[k]
                    a0 += W[j, k] * hk
                    a1 += W[j + 1, k] * hk
                    a2 += W[j + 2, k] * hk
                    a3 += W[j + 3, k] * hk
                pre[j] += a0
                pre[j + 1] += a1
                pre[j + 2] += a2
                pre[j + 3] += a3
        # sigmoid rows take exp(-a), candidate rows exp(2a)
        for j in range(2 * H):
            pre[j] = -pre[j]
        for j in range(2 * H, 3 * H):
            pre[j] = 2.0 * pre[j]
        for j in range(3 * H, G):
            pre[j] = -pre[j]
        vexp(pre, ex, ibuf)
        for j in range(2 * H):
            acts[t, j] = 1.0 / (1.0 + ex[j])
        for j in range(2 * H, 3 * H):
            acts[t, j] = 1.0 - 2.0 / (1.0 + ex[j])
        for j in range(3 * H, G):
            acts[t, j] = 1.0 / (1.0 + ex[j])
        for k in range(H):
            c = acts[t, k] * cs[t, k] + acts[t, H + k] * acts[t, 2 * H + k]
            cs[t + 1, k] = c
            pre[k] = 2.0 * c
        vexp(pre[:H], ex, ibuf)
        for k in range(H):
            tc = 1.0 - 2.0 / (1.0 + ex[k])
            tcs[t, k] = tc
            hs[t + 1, k] = acts[t, 3 * H + k] * tc
    out = bfc[0]
    for k in range(H):
        out += wfc[k] * hs[T, k]
    return out


@njit(**_OPTS)
def lstm_backward(W, wfc, zs, acts, cs, tcs, hs, dpred, da, dwfc):
    """Backpropagate ``dpred`` through head and cell; fill ``da`` and ``dwfc``.

    ``da[t]`` holds the loss gradient w.r.t. the gate pre-activations at
    step ``t``; weight gradients follow from :func:`weight_grads`.
    """
    G = W.shape[0]
    H = G // 4
    T = acts.shape[0]
    dh = np.empty(H)
    dc = np.zeros(H)
    for k in range(H):
        dh[k] = dpred * wfc[k]
        dwfc[k] = dpred * hs[T, k]
    for t in range(T - 1, -1, -1):
        for k in range(H):
            f = acts[t, k]
            i = acts[t, H + k]
            g = acts[t, 2 * H + k]
            o = acts[t, 3 * H + k]
            tc = tcs[t, k]
            dct = dc[k] + dh[k] * o * (1.0 - tc * tc)
            da[t, k] = dct * cs[t, k] * f * (1.0 - f)
            da[t, H + k] = dct * g * i * (1.0 - i)
            da[t, 2 * H + k] = dct * i * (1.0 - g * g)
            da[t, 3 * H + k] = dh[k] * tc * o * (1.0 - o)
            dc[k] = dct * f
        if t > 0:
            for k in range(H):
                dh[k] = 0.0
            for j in range(0, G, 4):
                d0 = da[t, j]
                d1 = da[t, j + 1]
                d2 = da[t, j + 2]
                d3 = da[t, j + 3]
                for k in range(H):
                    dh[k] += W[j, k] * d0 + W[j + 1, k] * d1 + W[j + 2, k] * d2 + W[j + 3, k] * d3


@njit(**_OPTS)
def weight_grads(da, zs, dW, db):
    G = da.shape[1]
    T, Z = zs.shape
    for j in range(G):
        gb = 0.0
        for k in range(Z):
            dW[j, k] = 0.0
        for t in range(T):
            d = da[t, j]
            gb += d
            for k in range(Z):
                dW[j, k] += d * zs[t, k]
        db[j] = gb


@njit(**_OPTS)
def _adam_vec(theta, g, m, v, n, a, ic2, beta1, beta2, eps):
    for k in range(n):
        mk = beta1 * m[k] + (1.0 - beta1) * g[k]
        vk = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k]
        m[k] = mk
        v[k] = vk
        theta[k] -= a * mk / (math.sqrt(vk * ic2) + eps)


@njit(**_OPTS)
def _sgd_vec(theta, g, n, lr):
    for k in range(n):
        theta[k] -= lr * g[k]


@njit(**_OPTS)
def train_lstm(W, b, wfc, bfc, windows, targets, order, lr, use_adam, beta1, beta2, eps, history):
    """Per-window updates over ``order`` (epochs x windows); squared-error loss.

    ``history[e]`` receives the mean pre-update loss of epoch ``e``.
    """
    G, Z = W.shape
    H = G // 4
    T = windows.shape[1]
    E, N = order.shape
    zs = np.zeros((T, Z))
    acts = np.zeros((T, G))
    cs = np.zeros((T + 1, H))
    tcs = np.zeros((T, H))
    hs = np.zeros((T + 1, H))
    da = np.zeros((T, G))
    dwfc = np.zeros(H)
    grow = np.empty(Z + 1)
    mW = np.zeros((G, Z + 1))
    vW = np.zeros((G, Z + 1))
    mfc = np.zeros(H + 1)
    vfc = np.zeros(H + 1)
    gfc = np.empty(H + 1)
    row = np.empty(Z + 1)
    fc = np.empty(H + 1)
    step = 0
    for e in range(E):
        total = 0.0
        for q in range(N):
            w = order[e, q]
            p = lstm_forward(W, b, wfc, bfc, windows[w], zs, acts, cs, tcs, hs)
            r = p - targets[w]
            total += r * r
            dp = 2.0 * r
            lstm_backward(W, wfc, zs, acts, cs, tcs, hs, dp, da, dwfc)
            step += 1
            a = lr
            ic2 = 1.0
            if use_adam:
                a = lr / (1.0 - beta1**step)
                ic2 = 1.0 / (1.0 - beta2**step)
            # fused weight gradient + update, one gate row at a time
            for j in range(G):
                for k in range(Z + 1):
                    grow[k] = 0.0
                for t in range(T):
                    d = da[t, j]
                    for k in range(Z):
                        grow[k] += d * zs[t, k]
                    grow[Z] += d
                for k in range(Z):
                    row[k] = W[j, k]
                row[Z] = b[j]
                if use_adam:
                    _adam_vec(row, grow, mW[j], vW[j], Z + 1, a, ic2, beta1, beta2, eps)
                else:
                    _sgd_vec(row, grow, Z + 1, lr)
                for k in range(Z):
                    W[j, k] = row[k]
                b[j] = row[Z]
            for k in range(H):
                gfc[k] = dwfc[k]
                fc[k] = wfc[k]
            gfc[H] = dp
            fc[H] = bfc[0]
            if use_adam:
                _adam_vec(fc, gfc, mfc, vfc, H + 1, a, ic2, beta1, beta2, eps)
            else:
                _sgd_vec(fc, gfc, H + 1, lr)
            for k in range(H):
                wfc[k] = fc[k]
            bfc[0] = fc[H]
        history[e] = total / N


@njit(**_OPTS)
def lstm_predict(W, b, wfc, bfc, x):
    G, Z = W.shape
    H = G // 4
    T = x.shape[0]
    return lstm_forward(
        W, b, wfc, bfc, x,
        np.empty((T, Z)), np.empty((T, G)), np.empty((T + 1, H)),
        np.empty((T, H)), np.empty((T + 1, H)),
    )


# --- one-hidden-layer feedforward network (BP baseline) ---------------------


@njit(**_OPTS)
def mlp_forward(W1, b1, w2, b2, x, hbuf):
    Hm, n_in = W1.shape
    out = b2[0]
    for j in range(Hm):
        s = b1[j]
        for k in range(n_in):
            s += W1[j, k] * x[k]
        h = math.tanh(s)
        hbuf[j] = h
        out += w2[j] * h
    return out


@njit(**_OPTS)
def mlp_backward(W1, w2, x, hbuf, dpred, dW1, db1, dw2):
    """Fill parameter gradients for one sample; returns the output-bias gradient."""
    Hm, n_in = W1.shape
    for j in range(Hm):
        h = hbuf[j]
        dw2[j] = dpred * h
        ds = dpred * w2[j] * (1.0 - h * h)
        db1[j] = ds
        for k in range(n_in):
            dW1[j, k] = ds * x[k]
    return dpred


@njit(**_OPTS)
def train_mlp(W1, b1, w2, b2, windows, targets, order, lr, use_adam, beta1, beta2, eps, history):
    Hm, n_in = W1.shape
    E, N = order.shape
    P = Hm * n_in + 2 * Hm + 1
    theta = np.empty(P)
    grad = np.empty(P)
    m = np.zeros(P)
    v = np.zeros(P)
    hbuf = np.empty(Hm)
    dW1 = np.empty((Hm, n_in))
    db1 = np.empty(Hm)
    dw2 = np.empty(Hm)
    step = 0
    for e in range(E):
        total = 0.0
        for q in range(N):
            w = order[e, q]
            p = mlp_forward(W1, b1, w2, b2, windows[w], hbuf)
            r = p - targets[w]
            total += r * r
            db2 = mlp_backward(W1, w2, windows[w], hbuf, 2.0 * r, dW1, db1, dw2)
            # pack, update, unpack
            c = 0
            for j in range(Hm):
                for k in range(n_in):
                    theta[c] = W1[j, k]
                    grad[c] = dW1[j, k]
                    c += 1
            for j in range(Hm):
                theta[c] = b1[j]
                grad[c] = db1[j]
                theta[c + Hm] = w2[j]
                grad[c + Hm] = dw2[j]
                c += 1
            c += Hm
            theta[c] = b2[0]
            grad[c] = db2
            step += 1
            if use_adam:
                a = lr / (1.0 - beta1**step)
                ic2 = 1.0 / (1.0 - beta2**step)
                _adam_vec(theta, grad, m, v, P, a, ic2, beta1, beta2, eps)
            else:
                _sgd_vec(theta, grad, P, lr)
            c = 0
            for j in range(Hm):
                for k in range(n_in):
                    W1[j, k] = theta[c]
                    c += 1
            for j in range(Hm):
                b1[j] = theta[c]
                w2[j] = theta[c + Hm]
                c += 1
            c += Hm
            b2[0] = theta[c]
        history[e] = total / N
