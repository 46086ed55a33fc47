"""Backend selection for the hot kernels.

The recurrent unrolls, their reverse sweeps, and the pairwise dual updates
dominate runtime.  When numba is importable they are compiled with
``@njit(cache=True)``; otherwise (or when the environment variable
``SEQSVM_NUMBA`` is set to ``0``/``false``/``off``) the same source runs
as plain numpy.  Both backends share one implementation module and loop
order; compiled code may still contract multiply-adds, so cross-backend
results agree to rounding error rather than bitwise, while reruns on one
backend are bitwise stable.

``ACTIVE_BACKEND`` names the selected path ("numba" or "numpy");
``get_backend(name)`` exposes both for side-by-side benchmarking.
"""

import os

from . import _kernel_impl as _impl

_KERNEL_NAMES = (
    "lstm_forward",
    "lstm_backward",
    "gru_forward",
    "gru_backward",
    "smo_apply_pairs",
)

_FALSEY = {"0", "false", "off", "no"}


def _numba_requested() -> bool:
    return os.environ.get("SEQSVM_NUMBA", "1").strip().lower() not in _FALSEY


def _build_numpy() -> dict:
    return {name: getattr(_impl, name) for name in _KERNEL_NAMES}


def _build_numba() -> dict:
    from numba import njit

    return {
        name: njit(cache=True)(getattr(_impl, name)) for name in _KERNEL_NAMES
    }


_BACKENDS: dict[str, dict] = {"numpy": _build_numpy()}

ACTIVE_BACKEND = "numpy"
if _numba_requested():
    try:
        _BACKENDS["numba"] = _build_numba()
        ACTIVE_BACKEND = "numba"
    except ImportError:
        ACTIVE_BACKEND = "numpy"


def get_backend(name: str) -> dict:
    """Return the kernel table for ``name`` ("numpy" or "numba")."""
    if name == "numba" and name not in _BACKENDS:
        _BACKENDS["numba"] = _build_numba()
    return _BACKENDS[name]


_active = _BACKENDS[ACTIVE_BACKEND]

lstm_forward = _active["lstm_forward"]
lstm_backward = _active["lstm_backward"]
gru_forward = _active["gru_forward"]
gru_backward = _active["gru_backward"]
smo_apply_pairs = _active["smo_apply_pairs"]
