"""On-disk cache for eigensystems.

File layout (all little-endian)::

    magic      8 bytes   b"GSPEIGv\\0"
    version    uint32    1
    N          uint64    matrix dimension
    r          uint64    number of pairs
    key        32 bytes  SHA-256 content key
    float64[r]           eigenvalues
    float64[N*r]         eigenvectors, column-major
    float64[r]           residual norms

Only fully converged systems are stored.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
import tempfile
import warnings
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .eigen import EigenSystem

logger = logging.getLogger(__name__)

MAGIC = b"GSPEIGv\0"
VERSION = 1
_HEADER = struct.Struct("<8sIQQ32s")
CACHE_ENV = "GSPREC_CACHE_DIR"


class CacheWarning(UserWarning):
    pass


def content_key(L, r: int, tol: float = 1e-8, seed: int = 0) -> bytes:
    """SHA-256 over the CSR arrays of L plus the solver settings that affect the result."""
    M = sp.csr_matrix(getattr(L, "matrix", L), dtype=np.float64)
    M.sort_indices()
    h = hashlib.sha256()
    h.update(struct.pack("<QQ", *M.shape))
    h.update(np.ascontiguousarray(M.indptr, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(M.indices, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(M.data, dtype="<f8").tobytes())
    h.update(struct.pack("<Qdq", int(r), float(tol), int(seed)))
    return h.digest()


def resolve_cache_dir(configured=None) -> Path | None:
    """Environment override first, then the configured directory, else no caching."""
    env = os.environ.get(CACHE_ENV)
    chosen = env if env else configured
    return Path(chosen) if chosen else None


def cache_path(cache_dir, key: bytes) -> Path:
    return Path(cache_dir) / f"{key.hex()}.eig"


def cache_store(E: EigenSystem, key: bytes, cache_dir) -> Path | None:
    """Write atomically (temp file then rename). Non-converged systems are skipped."""
    if not E.all_converged:
        logger.info("not caching a partially converged eigensystem")
        return None
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    N, r = E.eigenvectors.shape
    target = cache_path(cache_dir, key)
    fd, tmp = tempfile.mkstemp(dir=cache_dir, prefix=".tmp-", suffix=".eig")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, N, r, key))
            fh.write(np.ascontiguousarray(E.eigenvalues, dtype="<f8").tobytes())
            fh.write(np.asfortranarray(E.eigenvectors, dtype="<f8").tobytes(order="F"))
            fh.write(np.ascontiguousarray(E.residuals, dtype="<f8").tobytes())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target


def cache_load(key: bytes, cache_dir) -> EigenSystem | None:
    """Return the cached system for ``key`` or None on a miss.

    A stale entry (key mismatch) is a silent miss; unreadable or truncated
    files are a miss with a :class:`CacheWarning`.
    """
    path = cache_path(cache_dir, key)
    if not path.exists():
        return None
    try:
        raw = path.read_bytes()
    except OSError as exc:
        warnings.warn(f"cannot read eigen cache {path}: {exc}", CacheWarning, stacklevel=2)
        return None
    if len(raw) < _HEADER.size:
        warnings.warn(f"truncated eigen cache header in {path}", CacheWarning, stacklevel=2)
        return None
    magic, version, N, r, stored_key = _HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        warnings.warn(f"unrecognised eigen cache file {path}", CacheWarning, stacklevel=2)
        return None
    if stored_key != key:
        return None
    expected = _HEADER.size + 8 * (r + N * r + r)
    if len(raw) != expected:
        warnings.warn(f"eigen cache {path} has {len(raw)} bytes, expected {expected}",
                      CacheWarning, stacklevel=2)
        return None
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    vals = body[:r].astype(np.float64)
    vecs = body[r:r + N * r].reshape((N, r), order="F").astype(np.float64)
    res = body[r + N * r:].astype(np.float64)
    return EigenSystem(vals, np.ascontiguousarray(vecs), res, np.ones(r, dtype=bool), 0)
