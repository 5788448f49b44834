"""Compare the numba and numpy kernel backends.

Times one forward pass, one backward pass and a few training epochs of a
single layer for several hidden sizes, then reports the speedup and the
largest difference in the trained weights between backends.

    python benchmarks/bench_kernels.py --hidden 8 32 128 --epochs 3
"""

import argparse
import time

import numpy as np

from ssp_hlstm.kernels import _numpy
from ssp_hlstm.lstm import init_params

try:
    from ssp_hlstm.kernels import _numba
except ImportError:
    _numba = None


def best_of(fn, reps, rounds=5):
    fn()  # warm up (and compile)
    times = []
    for _ in range(rounds):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        times.append((time.perf_counter() - t0) / reps)
    return min(times)


def bench_backend(mod, hidden, window, n_windows, epochs, seed=0):
    W, b, wfc, bfc = init_params(hidden, 1, seed).arrays()
    rng = np.random.default_rng(seed)
    windows = rng.random((n_windows, window, 1))
    targets = rng.random(n_windows)
    G, Z = W.shape
    ws = [np.zeros((window, Z)), np.zeros((window, G)), np.zeros((window + 1, hidden)),
          np.zeros((window, hidden)), np.zeros((window + 1, hidden))]
    da, dwfc = np.zeros((window, G)), np.zeros(hidden)

    fwd = best_of(lambda: mod.lstm_forward(W, b, wfc, bfc, windows[0], *ws), 50)
    bwd = best_of(lambda: mod.lstm_backward(W, wfc, *ws, 0.1, da, dwfc), 50)

    order = np.tile(np.arange(n_windows, dtype=np.int64), (epochs, 1))
    out = {}

    def train():
        p = [a.copy() for a in (W, b, wfc, bfc)]
        mod.train_lstm(*p, windows, targets, order, 0.01, True, 0.9, 0.999, 1e-8, np.zeros(epochs))
        out["W"] = p[0]

    tr = best_of(train, 1, rounds=3)
    return {"forward": fwd, "backward": bwd, "train": tr, "W": out["W"]}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hidden", type=int, nargs="+", default=[8, 32, 128])
    ap.add_argument("--window", type=int, default=12)
    ap.add_argument("--windows", type=int, default=36, help="training windows per epoch")
    ap.add_argument("--epochs", type=int, default=3)
    args = ap.parse_args()

    if _numba is None:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"window {args.window}, {args.windows} windows/epoch, {args.epochs} epochs")
    print(f"{'hidden':>6} {'kernel':>9} {'numpy':>11} {'numba':>11} {'speedup':>8}")
    for h in args.hidden:
        ref = bench_backend(_numpy, h, args.window, args.windows, args.epochs)
        fast = bench_backend(_numba, h, args.window, args.windows, args.epochs)
        for k in ("forward", "backward", "train"):
            print(f"{h:>6} {k:>9} {ref[k] * 1e3:>9.3f}ms {fast[k] * 1e3:>9.3f}ms {ref[k] / fast[k]:>7.1f}x")
        diff = np.max(np.abs(ref["W"] - fast["W"]))
        est = fast["train"] / args.epochs * 300
        print(f"{h:>6} max |W_numpy - W_numba| after training: {diff:.1e}; "
              f"300 epochs with numba ~ {est:.1f} s per layer")


if __name__ == "__main__":
    main()
