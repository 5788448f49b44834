"""Vectorised numpy versions of the kernels in :mod:`._numba`.

Same signatures and array conventions; used when numba is unavailable or
disabled through ``SSP_HLSTM_BACKEND=numpy``. Results agree with the
compiled path to rounding, not bitwise.
"""

import numpy as np


def _sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def lstm_forward(W, b, wfc, bfc, x, zs, acts, cs, tcs, hs):
    G, Z = W.shape
    H = G // 4
    T = x.shape[0]
    hs[0] = 0.0
    cs[0] = 0.0
    for t in range(T):
        zs[t, :H] = hs[t]
        zs[t, H:] = x[t]
        a = W @ zs[t] + b
        acts[t, :2 * H] = _sigmoid(a[:2 * H])
        acts[t, 2 * H:3 * H] = np.tanh(a[2 * H:3 * H])
        acts[t, 3 * H:] = _sigmoid(a[3 * H:])
        f, i, g, o = acts[t, :H], acts[t, H:2 * H], acts[t, 2 * H:3 * H], acts[t, 3 * H:]
        cs[t + 1] = f * cs[t] + i * g
        tcs[t] = np.tanh(cs[t + 1])
        hs[t + 1] = o * tcs[t]
    return float(bfc[0] + wfc @ hs[T])


def lstm_backward(W, wfc, zs, acts, cs, tcs, hs, dpred, da, dwfc):
    G = W.shape[0]
    H = G // 4
    T = acts.shape[0]
    dh = dpred * wfc
    dwfc[:] = dpred * hs[T]
    dc = np.zeros(H)
    for t in range(T - 1, -1, -1):
        f, i, g, o = acts[t, :H], acts[t, H:2 * H], acts[t, 2 * H:3 * H], acts[t, 3 * H:]
        tc = tcs[t]
        dct = dc + dh * o * (1.0 - tc * tc)
        da[t, :H] = dct * cs[t] * f * (1.0 - f)
        da[t, H:2 * H] = dct * g * i * (1.0 - i)
        da[t, 2 * H:3 * H] = dct * i * (1.0 - g * g)
        da[t, 3 * H:] = dh * tc * o * (1.0 - o)
        dc = dct * f
        if t > 0:
            dh = W[:, :H].T @ da[t]


def weight_grads(da, zs, dW, db):
    dW[:] = da.T @ zs
    db[:] = da.sum(axis=0)


def _adam(theta, g, m, v, a, ic2, beta1, beta2, eps):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    theta -= a * m / (np.sqrt(v * ic2) + eps)


def train_lstm(W, b, wfc, bfc, windows, targets, order, lr, use_adam, beta1, beta2, eps, history):
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
    dW = np.zeros((G, Z))
    db = np.zeros(G)
    # moments for [W | b] rows and [wfc, bfc]
    mW = np.zeros((G, Z + 1))
    vW = np.zeros((G, Z + 1))
    mfc = np.zeros(H + 1)
    vfc = np.zeros(H + 1)
    step = 0
    for e in range(E):
        total = 0.0
        for w in order[e]:
            p = lstm_forward(W, b, wfc, bfc, windows[w], zs, acts, cs, tcs, hs)
            r = p - targets[w]
            total += r * r
            dp = 2.0 * r
            lstm_backward(W, wfc, zs, acts, cs, tcs, hs, dp, da, dwfc)
            weight_grads(da, zs, dW, db)
            step += 1
            Wb = np.concatenate([W, b[:, None]], axis=1)
            gWb = np.concatenate([dW, db[:, None]], axis=1)
            fc = np.concatenate([wfc, bfc])
            gfc = np.concatenate([dwfc, [dp]])
            if use_adam:
                a = lr / (1.0 - beta1**step)
                ic2 = 1.0 / (1.0 - beta2**step)
                _adam(Wb, gWb, mW, vW, a, ic2, beta1, beta2, eps)
                _adam(fc, gfc, mfc, vfc, a, ic2, beta1, beta2, eps)
            else:
                Wb -= lr * gWb
                fc -= lr * gfc
            W[:] = Wb[:, :Z]
            b[:] = Wb[:, Z]
            wfc[:] = fc[:H]
            bfc[0] = fc[H]
        history[e] = total / N


def lstm_predict(W, b, wfc, bfc, x):
    G, Z = W.shape
    H = G // 4
    T = x.shape[0]
    return lstm_forward(
        W, b, wfc, bfc, x,
        np.empty((T, Z)), np.empty((T, G)), np.empty((T + 1, H)),
        np.empty((T, H)), np.empty((T + 1, H)),
    )


def mlp_forward(W1, b1, w2, b2, x, hbuf):
    hbuf[:] = np.tanh(W1 @ x + b1)
    return float(b2[0] + w2 @ hbuf)


def mlp_backward(W1, w2, x, hbuf, dpred, dW1, db1, dw2):
    dw2[:] = dpred * hbuf
    db1[:] = dpred * w2 * (1.0 - hbuf * hbuf)
    dW1[:] = np.outer(db1, x)
    return dpred


def train_mlp(W1, b1, w2, b2, windows, targets, order, lr, use_adam, beta1, beta2, eps, history):
    Hm, n_in = W1.shape
    E, N = order.shape
    P = Hm * n_in + 2 * Hm + 1
    m = np.zeros(P)
    v = np.zeros(P)
    hbuf = np.empty(Hm)
    dW1 = np.empty((Hm, n_in))
    db1 = np.empty(Hm)
    dw2 = np.empty(Hm)
    step = 0
    for e in range(E):
        total = 0.0
        for w in order[e]:
            p = mlp_forward(W1, b1, w2, b2, windows[w], hbuf)
            r = p - targets[w]
            total += r * r
            db2 = mlp_backward(W1, w2, windows[w], hbuf, 2.0 * r, dW1, db1, dw2)
            theta = np.concatenate([W1.ravel(), b1, w2, b2])
            grad = np.concatenate([dW1.ravel(), db1, dw2, [db2]])
            step += 1
            if use_adam:
                a = lr / (1.0 - beta1**step)
                ic2 = 1.0 / (1.0 - beta2**step)
                _adam(theta, grad, m, v, a, ic2, beta1, beta2, eps)
            else:
                theta -= lr * grad
            c = Hm * n_in
            W1[:] = theta[:c].reshape(Hm, n_in)
            b1[:] = theta[c:c + Hm]
            w2[:] = theta[c + Hm:c + 2 * Hm]
            b2[0] = theta[c + 2 * Hm]
        history[e] = total / N
