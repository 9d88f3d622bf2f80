"""Backend selection for the hot scoring kernels.

Two interchangeable implementations exist: a numba-jitted one and a pure
numpy one. The env var CFX_BACKEND picks the default at import time
("numba" unless numba is unavailable, "numpy" to force the fallback);
set_backend() switches at runtime (the benchmark compares both).

Kernel contract (both backends, bit-for-bit identical aggregation order):
forest predictions accumulate per-tree leaf values in ascending tree order,
divide by the tree count, and clamp to [0, 1].
"""

from __future__ import annotations

import os

from cfx._kernels import numpy_impl

try:
    from cfx._kernels import numba_impl
    HAS_NUMBA = True
except ImportError:  # numba missing: numpy fallback only
    numba_impl = None
    HAS_NUMBA = False

_KERNEL_NAMES = (
    "forest_predict_naive",
    "qs_predict",
    "qs_fold_features",
    "qs_leaf_values",
    "qs_predict_specialized",
)

_active = {"name": None}


def available_backends() -> tuple[str, ...]:
    return ("numba", "numpy") if HAS_NUMBA else ("numpy",)


def set_backend(name: str) -> None:
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    impl = numba_impl if name == "numba" else numpy_impl
    g = globals()
    for fn in _KERNEL_NAMES:
        g[fn] = getattr(impl, fn)
    _active["name"] = name


def active_backend() -> str:
    return _active["name"]


_default = os.environ.get("CFX_BACKEND", "numba" if HAS_NUMBA else "numpy").lower()
if _default not in ("numba", "numpy"):
    _default = "numba" if HAS_NUMBA else "numpy"
if _default == "numba" and not HAS_NUMBA:
    _default = "numpy"
set_backend(_default)
