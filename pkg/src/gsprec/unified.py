"""Joint user-item graph and its symmetric normalised Laplacian."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .seqgraph import inv_sqrt_degrees


@dataclass(frozen=True, eq=False)
class NormalizedLaplacian:
    matrix: sp.csr_matrix
    degrees: np.ndarray
    m: int
    n: int


def assemble_adjacency(X, S_norm) -> sp.csr_matrix:
    """Block matrix [[0, X], [X^T, S_norm]] of shape (m+n) x (m+n).

    X is used as given (binary), not degree-normalised.
    """
    X = sp.csr_matrix(X, dtype=np.float64)
    S_norm = sp.csr_matrix(S_norm, dtype=np.float64)
    m, n = X.shape
    if S_norm.shape != (n, n):
        raise ValueError(f"item graph has shape {S_norm.shape}, expected {(n, n)} to match X {X.shape}")
    A = sp.bmat([[sp.csr_matrix((m, m)), X], [X.T, S_norm]], format="csr")
    A.eliminate_zeros()
    A.sort_indices()
    return A


def normalized_laplacian(A, m: int | None = None) -> NormalizedLaplacian:
    """L = I - D^(-1/2) A D^(-1/2), D = diag(A 1).

    Isolated nodes get the identity row (L_ii = 1, no off-diagonals).
    ``m`` records the user/item boundary when known.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    N = A.shape[0]
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = inv_sqrt_degrees(deg)
    coo = A.tocoo()
    data = -coo.data * (dinv[coo.row] * dinv[coo.col])
    L = sp.csr_matrix((data, (coo.row, coo.col)), shape=(N, N))
    L = (L + sp.identity(N, format="csr")).tocsr()
    L.eliminate_zeros()
    L.sort_indices()
    m = 0 if m is None else int(m)
    return NormalizedLaplacian(L, deg, m, N - m)


def connected_components(A) -> int:
    """Number of connected components (isolated nodes count as their own)."""
    coo = sp.coo_matrix(A)
    nz = coo.data != 0
    return kernels.union_find_components(A.shape[0], coo.row[nz], coo.col[nz])


def unified_laplacian(X, S_norm) -> NormalizedLaplacian:
    A = assemble_adjacency(X, S_norm)
    return normalized_laplacian(A, m=X.shape[0])
