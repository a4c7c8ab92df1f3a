"""Monotonic-alignment-search backend selection.

Two interchangeable backends compute the same dynamic program:

- ``reference``: the pure-Python implementation in :mod:`styletts.alignment`
- ``native``: a shared library exposing a C ABI
  (``int mas_search(const float*, uint32_t, uint32_t, uint32_t*)``)

``STYLETTS_MAS_BACKEND`` selects the backend (default ``reference``);
``STYLETTS_MAS_LIB`` points at the shared library when the default search
locations do not apply.
"""

from __future__ import annotations

import ctypes
import os
from pathlib import Path

import numpy as np

from . import alignment

ENV_BACKEND = "STYLETTS_MAS_BACKEND"
ENV_LIB = "STYLETTS_MAS_LIB"

STATUS_OK = 0
STATUS_INFEASIBLE = 1
STATUS_NONFINITE = 2


class BackendError(Exception):
    pass


class ReferenceBackend:
    name = "reference"

    def search(self, log_weights: np.ndarray) -> np.ndarray:
        return alignment.mas_durations(np.asarray(log_weights, dtype=np.float64))

    def search_batch(self, items: list[np.ndarray]) -> list[np.ndarray]:
        return [self.search(m) for m in items]


class NativeBackend:
    """ctypes binding over the C ABI kernel."""

    name = "native"

    def __init__(self, lib_path: str | os.PathLike):
        self._lib = ctypes.CDLL(str(lib_path))
        self._lib.mas_search.restype = ctypes.c_int
        self._lib.mas_search.argtypes = [
            ctypes.POINTER(ctypes.c_float),
            ctypes.c_uint32,
            ctypes.c_uint32,
            ctypes.POINTER(ctypes.c_uint32),
        ]
        self._lib.mas_search_batch.restype = ctypes.c_int
        self._lib.mas_search_batch.argtypes = [
            ctypes.POINTER(ctypes.c_float),
            ctypes.POINTER(ctypes.c_uint32),
            ctypes.POINTER(ctypes.c_uint32),
            ctypes.c_uint32,
            ctypes.POINTER(ctypes.c_uint32),
            ctypes.POINTER(ctypes.c_int),
        ]

    def search_raw(self, log_weights: np.ndarray) -> tuple[int, np.ndarray]:
        logw = np.ascontiguousarray(log_weights, dtype=np.float32)
        n, t = logw.shape
        out = np.zeros(n, dtype=np.uint32)
        status = self._lib.mas_search(
            logw.ctypes.data_as(ctypes.POINTER(ctypes.c_float)),
            ctypes.c_uint32(n),
            ctypes.c_uint32(t),
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)),
        )
        return status, out

    def search(self, log_weights: np.ndarray) -> np.ndarray:
        status, out = self.search_raw(log_weights)
        if status == STATUS_INFEASIBLE:
            n, t = log_weights.shape
            raise alignment.InfeasibleAlignmentError(
                f"N={n} phonemes cannot cover T={t} frames"
            )
        if status != STATUS_OK:
            raise BackendError(f"native mas_search failed with status {status}")
        return out.astype(np.int64)

    def search_batch_raw(
        self, items: list[np.ndarray]
    ) -> tuple[int, list[np.ndarray], np.ndarray]:
        ns = np.array([m.shape[0] for m in items], dtype=np.uint32)
        ts = np.array([m.shape[1] for m in items], dtype=np.uint32)
        if items:
            packed = np.concatenate(
                [np.ascontiguousarray(m, dtype=np.float32).ravel() for m in items]
            )
        else:
            packed = np.zeros(0, dtype=np.float32)
        out = np.zeros(int(ns.sum()), dtype=np.uint32)
        statuses = np.zeros(max(len(items), 1), dtype=np.int32)
        status = self._lib.mas_search_batch(
            packed.ctypes.data_as(ctypes.POINTER(ctypes.c_float)),
            ns.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)),
            ts.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)),
            ctypes.c_uint32(len(items)),
            out.ctypes.data_as(ctypes.POINTER(ctypes.c_uint32)),
            statuses.ctypes.data_as(ctypes.POINTER(ctypes.c_int)),
        )
        results = []
        offset = 0
        for n in ns:
            results.append(out[offset : offset + int(n)].copy())
            offset += int(n)
        return status, results, statuses[: len(items)]

    def search_batch(self, items: list[np.ndarray]) -> list[np.ndarray]:
        status, results, _ = self.search_batch_raw(items)
        if status != STATUS_OK:
            raise BackendError(f"native mas_search_batch failed with status {status}")
        return [r.astype(np.int64) for r in results]


def _default_lib_candidates():
    here = Path(__file__).resolve()
    for root in [here.parents[2], here.parents[3] if len(here.parents) > 3 else None]:
        if root is None:
            continue
        for name in ("libmas_kernel.so", "libmas_kernel.dylib", "mas_kernel.dll"):
            yield root / "mas-kernel" / "target" / "release" / name


def find_native_library() -> Path | None:
    lib = os.environ.get(ENV_LIB)
    if lib:
        p = Path(lib)
        return p if p.exists() else None
    for cand in _default_lib_candidates():
        if cand.exists():
            return cand
    return None


_cached: dict[str, object] = {}


def get_backend(name: str | None = None):
    """Resolve a MAS backend by name or from the environment."""
    name = name or os.environ.get(ENV_BACKEND, "reference")
    if name in _cached:
        return _cached[name]
    if name == "reference":
        backend = ReferenceBackend()
    elif name == "native":
        lib = find_native_library()
        if lib is None:
            raise BackendError(
                "native MAS backend requested but no shared library found; "
                f"set {ENV_LIB} or build mas-kernel"
            )
        backend = NativeBackend(lib)
    else:
        raise BackendError(f"unknown MAS backend {name!r}")
    _cached[name] = backend
    return backend
