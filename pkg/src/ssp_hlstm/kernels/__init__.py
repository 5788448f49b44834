"""Hot loops for LSTM/MLP training, dispatched to numba or plain numpy.

The backend is chosen once at import time from ``SSP_HLSTM_BACKEND``
(``numba`` or ``numpy``). Without the variable numba is used when it
imports; otherwise the numpy path is used.
"""

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

ENV_VAR = "SSP_HLSTM_BACKEND"


def _select():
    wanted = os.environ.get(ENV_VAR, "").strip().lower()
    if wanted not in ("", "numba", "numpy"):
        raise ImportError(f"{ENV_VAR} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy":
        return "numpy", _numpy
    try:
        from . import _numba
    except ImportError:
        if wanted == "numba":
            raise
        log.info("numba unavailable, using numpy kernels")
        return "numpy", _numpy
    return "numba", _numba


BACKEND, _impl = _select()

lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
lstm_predict = _impl.lstm_predict
weight_grads = _impl.weight_grads
train_lstm = _impl.train_lstm
mlp_forward = _impl.mlp_forward
mlp_backward = _impl.mlp_backward
train_mlp = _impl.train_mlp

__all__ = [
    "BACKEND",
    "lstm_forward",
    "lstm_backward",
    "lstm_predict",
    "weight_grads",
    "train_lstm",
    "mlp_forward",
    "mlp_backward",
    "train_mlp",
]
