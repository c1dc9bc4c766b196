"""Thin ctypes binding to MKL PARDISO for complex symmetric matrices.

Used only when an MKL runtime library can be loaded; the solver module falls
back to SuperLU otherwise. Location: ``STLSIM_MKL_RT`` if set, then the
library search path, then the lib directory of the running interpreter.
"""
from __future__ import annotations

import ctypes
import ctypes.util
import os
import sys
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.sparse as sp

COMPLEX_SYMMETRIC = 6
_c_int_p = ctypes.POINTER(ctypes.c_int32)


@lru_cache(maxsize=1)
def _library():
    candidates = []
    if os.environ.get("STLSIM_MKL_RT"):
        candidates.append(os.environ["STLSIM_MKL_RT"])
    found = ctypes.util.find_library("mkl_rt")
    if found:
        candidates.append(found)
    for root in {sys.prefix, "/usr/local", "/usr"}:
        candidates += sorted(str(p) for p in Path(root, "lib").glob("libmkl_rt.so*"))
    for c in candidates:
        try:
            lib = ctypes.CDLL(c)
            lib.pardiso.restype = None
            # parallelism comes from concurrent frequencies, one thread per solve
            lib.MKL_Set_Num_Threads(1)
            return lib
        except (OSError, AttributeError):
            continue
    return None


def available() -> bool:
    if os.environ.get("STLSIM_SOLVER", "").lower() == "superlu":
        return False
    return _library() is not None


class PardisoError(RuntimeError):
    pass


class PardisoFactor:
    """LDL^T factorization of a complex symmetric matrix (upper triangle is read)."""

    def __init__(self, A):
        lib = _library()
        if lib is None:
            raise PardisoError("MKL runtime not found")
        self._lib = lib
        U = sp.triu(sp.csr_matrix(A), format="csr")
        U.sort_indices()
        self.n = U.shape[0]
        self._ia = (U.indptr + 1).astype(np.int32)
        self._ja = (U.indices + 1).astype(np.int32)
        self._a = np.ascontiguousarray(U.data, dtype=np.complex128)
        self._pt = np.zeros(64, dtype=np.int64)
        iparm = np.zeros(64, dtype=np.int32)
        iparm[0] = 1  # user-supplied parameters
        iparm[1] = 2  # nested-dissection ordering
        iparm[9] = 8  # pivot perturbation 1e-8
        iparm[26] = 0
        iparm[33] = 0
        self._iparm = iparm
        self._alive = False
        self._call(12, np.zeros(1, complex), np.zeros(1, complex), nrhs=1)
        self._alive = True
        self.perturbed_pivots = int(iparm[13])

    def _call(self, phase: int, b: np.ndarray, x: np.ndarray, nrhs: int = 1) -> None:
        err = ctypes.c_int32(0)
        i32 = ctypes.c_int32
        self._lib.pardiso(
            self._pt.ctypes.data_as(ctypes.c_void_p),
            ctypes.byref(i32(1)),
            ctypes.byref(i32(1)),
            ctypes.byref(i32(COMPLEX_SYMMETRIC)),
            ctypes.byref(i32(phase)),
            ctypes.byref(i32(self.n)),
            self._a.ctypes.data_as(ctypes.c_void_p),
            self._ia.ctypes.data_as(_c_int_p),
            self._ja.ctypes.data_as(_c_int_p),
            ctypes.byref(i32(0)),
            ctypes.byref(i32(nrhs)),
            self._iparm.ctypes.data_as(_c_int_p),
            ctypes.byref(i32(0)),
            b.ctypes.data_as(ctypes.c_void_p),
            x.ctypes.data_as(ctypes.c_void_p),
            ctypes.byref(err),
        )
        if err.value != 0:
            raise PardisoError(f"PARDISO phase {phase} returned error {err.value}")

    def solve(self, b) -> np.ndarray:
        b = np.ascontiguousarray(b, dtype=np.complex128)
        x = np.zeros_like(b)
        self._call(33, b, x, nrhs=1 if b.ndim == 1 else b.shape[1])
        return x

    def free(self) -> None:
        if self._alive:
            self._alive = False
            dummy = np.zeros(1, complex)
            self._call(-1, dummy, dummy)

    def __del__(self):
        try:
            self.free()
        except Exception:
            pass
