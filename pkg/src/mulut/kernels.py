"""Backend selection for the interpolation kernels.

MULUT_BACKEND picks the implementation:

    auto   use numba when importable, else numpy (default)
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy kernels

Both backends do identical integer arithmetic, so outputs are byte-equal;
the switch only trades JIT warmup against per-query speed.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _kernels_numpy

_BACKEND: ModuleType | None = None
_BACKEND_NAME = ""


def _load(name: str) -> tuple[ModuleType, str]:
    if name == "numpy":
        return _kernels_numpy, "numpy"
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba, "numba"
    if name == "auto":
        try:
            from . import _kernels_numba

            return _kernels_numba, "numba"
        except ImportError:
            return _kernels_numpy, "numpy"
    raise ValueError(f"MULUT_BACKEND={name!r} not one of auto, numba, numpy")


def backend() -> ModuleType:
    """The active kernel module (resolved once per process)."""
    global _BACKEND, _BACKEND_NAME
    if _BACKEND is None:
        _BACKEND, _BACKEND_NAME = _load(os.environ.get("MULUT_BACKEND", "auto"))
    return _BACKEND


def backend_name() -> str:
    backend()
    return _BACKEND_NAME


def set_backend(name: str) -> None:
    """Force a backend programmatically (tests and benchmarks)."""
    global _BACKEND, _BACKEND_NAME
    _BACKEND, _BACKEND_NAME = _load(name)


def interp_into(values2d, levels: int, q: int, x, out, lo: int, hi: int) -> None:
    """Fill out[lo:hi] with numerators for queries x[:, lo:hi]; n from x."""
    fn = backend().interp4_into if x.shape[0] == 4 else backend().interp3_into
    fn(values2d, levels, q, x, out, lo, hi)


def interp_batch(values2d, levels: int, q: int, x) -> np.ndarray:
    out = np.empty((x.shape[1], values2d.shape[1]), dtype=np.int64)
    interp_into(values2d, levels, q, x, out, 0, x.shape[1])
    return out


def interp_batch_tape(values2d, levels: int, q: int, x):
    # Tape recording is a training-path concern; it always uses the numpy
    # implementation (identical arithmetic, richer return).
    return _kernels_numpy.interp_batch_tape(values2d, levels, q, x)
