"""Backend selection for the hot loops.

The Cython extension ``bitextfilter._kernels`` is used when it was built;
otherwise the numpy fallback in ``_kernels_py`` is used.  Both expose::

    sortable_keys(scores) -> uint64 array
    prefix_histogram(keys, prefix, prefix_bits, bits) -> int64 array
    top_k_mask(scores, ids, k) -> bool array
    token_counts(texts) -> int64 array
    char_counts(texts) -> int64 array
"""

from __future__ import annotations

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

_impl = _compiled if _compiled is not None else _kernels_py


def backend() -> str:
    return "cython" if _impl is _compiled and _compiled is not None else "python"


def set_backend(name: str) -> None:
    """Force a backend (used by the benchmark and the parity tests)."""
    global _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    _impl = BACKENDS[name]


def sortable_keys(scores) -> np.ndarray:
    return _impl.sortable_keys(np.ascontiguousarray(scores, dtype=np.float64))


def prefix_histogram(keys, prefix: int, prefix_bits: int, bits: int) -> np.ndarray:
    return _impl.prefix_histogram(np.ascontiguousarray(keys, dtype=np.uint64), prefix, prefix_bits, bits)


def top_k_mask(scores, ids, k: int) -> np.ndarray:
    return _impl.top_k_mask(
        np.ascontiguousarray(scores, dtype=np.float64), np.ascontiguousarray(ids, dtype=np.int64), int(k)
    )


def token_counts(texts) -> np.ndarray:
    return _impl.token_counts(list(texts))


def char_counts(texts) -> np.ndarray:
    return _impl.char_counts(list(texts))
