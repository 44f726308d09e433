"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``GSPREC_PURE_PYTHON=1``
to force the numpy fallback. Callers go through the wrappers below, which
normalise index dtypes to int64 so both backends see identical inputs.
"""

import importlib
import os

import numpy as np

from . import _kernels_py

_FORCE_PURE = os.environ.get("GSPREC_PURE_PYTHON", "").strip().lower() in {"1", "true", "yes"}


def _load_compiled():
    try:
        return importlib.import_module("gsprec._kernels")
    except ImportError:
        return None


_compiled = None if _FORCE_PURE else _load_compiled()
_impl = _compiled if _compiled is not None else _kernels_py
BACKEND = "cython" if _compiled is not None else "python"


def available_backends():
    names = ["python"]
    if _load_compiled() is not None:
        names.insert(0, "cython")
    return names


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython' or 'python'); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        mod = _load_compiled()
        if mod is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return mod
    raise ValueError(f"unknown kernel backend {name!r}")


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


class CSROperator:
    """Matrix-vector products with a fixed CSR matrix.

    Index arrays are converted once so repeated products (Krylov solvers)
    avoid per-call casting.
    """

    def __init__(self, matrix, backend=None):
        matrix = matrix.tocsr()
        self.shape = matrix.shape
        self.indptr = _i64(matrix.indptr)
        self.indices = _i64(matrix.indices)
        self.data = np.ascontiguousarray(matrix.data, dtype=np.float64)
        self._mod = get_backend(backend)

    def __call__(self, x, out=None):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if out is None:
            out = np.empty(self.shape[0], dtype=np.float64)
        self._mod.csr_matvec(self.indptr, self.indices, self.data, x, out)
        return out

    def matmat(self, X):
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((self.shape[0], X.shape[1]), dtype=np.float64)
        for j in range(X.shape[1]):
            out[:, j] = self(X[:, j])
        return out


def union_find_components(n, rows, cols, backend=None):
    return int(get_backend(backend).union_find_components(int(n), _i64(rows), _i64(cols)))


def consecutive_pairs(indptr, items, backend=None):
    return get_backend(backend).consecutive_pairs(_i64(indptr), _i64(items))


def topk_excluding(scores, seen_indptr, seen_indices, k, backend=None):
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    m = scores.shape[0]
    out_items = np.full((m, k), -1, dtype=np.int64)
    out_len = np.zeros(m, dtype=np.int64)
    get_backend(backend).topk_excluding(scores, _i64(seen_indptr), _i64(seen_indices), int(k),
                                        out_items, out_len)
    return out_items, out_len


def ranking_metrics(ranked, lengths, rel_indptr, rel_indices, ks, backend=None):
    ks = [int(k) for k in ks]
    m = ranked.shape[0]
    ndcg = np.empty((m, len(ks)), dtype=np.float64)
    mrr = np.empty((m, len(ks)), dtype=np.float64)
    get_backend(backend).ranking_metrics(_i64(ranked), _i64(lengths), _i64(rel_indptr),
                                         _i64(rel_indices), ks, ndcg, mrr)
    return ndcg, mrr
