"""Spectral score filters on the unified-graph eigenbasis.

Bandpass: a Gaussian window over min-max normalised retained eigenvalues,
applied to the item-degree-normalised interaction signal through the item
rows of the eigenvectors. Lowpass: a plain projection onto the retained
subspace of the interaction matrix augmented with user-user similarity.
Both are evaluated right-to-left in user blocks so no n x n (or
(m+n) x (m+n)) dense intermediate is formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .eigen import EigenSystem
from .seqgraph import inv_sqrt_degrees

DEFAULT_BLOCK = 2048


@dataclass(frozen=True)
class BandpassParams:
    center: float
    width: float

    def __post_init__(self):
        if not (0.0 <= self.center <= 1.0):
            raise ValueError(f"bandpass center must lie in [0, 1], got {self.center}")
        if not self.width > 0:
            raise ValueError(f"bandpass width must be positive, got {self.width}")


@dataclass(frozen=True, eq=False)
class DegreeVectors:
    users: np.ndarray
    items: np.ndarray

    @classmethod
    def from_interactions(cls, X) -> "DegreeVectors":
        X = sp.csr_matrix(X)
        return cls(np.asarray(X.sum(axis=1)).ravel(), np.asarray(X.sum(axis=0)).ravel())


def normalized_eigenvalues(eigenvalues) -> np.ndarray:
    """Min-max rescale to [0, 1] over the values given; constant input maps to 0."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size == 0:
        raise ValueError("need at least one eigenvalue")
    lo, hi = lam.min(), lam.max()
    if hi == lo:
        return np.zeros_like(lam)
    return (lam - lo) / (hi - lo)


def gaussian_kernel(eigenvalues, params: BandpassParams) -> np.ndarray:
    """exp(-(lam_bar - c)^2 / w) on the normalised retained spectrum."""
    lam_bar = normalized_eigenvalues(eigenvalues)
    return np.exp(-((lam_bar - params.center) ** 2) / params.width)


def _check_basis(X, E: EigenSystem):
    m, n = X.shape
    if E.eigenvectors.shape[0] != m + n:
        raise ValueError(
            f"eigenvectors have {E.eigenvectors.shape[0]} rows, expected m+n={m + n} for X {X.shape}"
        )


def _blocks(m, block_size):
    block_size = max(1, int(block_size))
    for start in range(0, m, block_size):
        yield start, min(start + block_size, m)


def bandpass_scores(X, E: EigenSystem, params: BandpassParams | None = None, *, weights=None,
                    degrees: DegreeVectors | None = None, block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """F_BP = X D_I^(-1/2) U_I G U_I^T D_I^(-1/2), an m x n dense array.

    ``U_I`` is the item block (rows m..m+n-1) of the unified eigenvectors.
    ``weights`` overrides the kernel diagonal G (used by tests and ablations).
    """
    X = sp.csr_matrix(X, dtype=np.float64)
    _check_basis(X, E)
    m, n = X.shape
    if weights is None:
        if params is None:
            raise ValueError("give either bandpass params or explicit weights")
        weights = gaussian_kernel(E.eigenvalues, params)
    weights = np.asarray(weights, dtype=np.float64)
    degrees = degrees or DegreeVectors.from_interactions(X)
    P = inv_sqrt_degrees(degrees.items)[:, None] * E.eigenvectors[m:, :]
    right = (P * weights).T
    out = np.empty((m, n), dtype=np.float64)
    for start, stop in _blocks(m, block_size):
        out[start:stop] = np.asarray(X[start:stop] @ P) @ right
    return out


def user_similarity(X, degrees: DegreeVectors | None = None) -> sp.csr_matrix:
    """C_U = (D_U^(-1/2) X)(D_U^(-1/2) X)^T as a sparse m x m matrix."""
    X = sp.csr_matrix(X, dtype=np.float64)
    degrees = degrees or DegreeVectors.from_interactions(X)
    Xu = sp.diags(inv_sqrt_degrees(degrees.users)) @ X
    C = (Xu @ Xu.T).tocsr()
    C.sort_indices()
    return C


def augmented_degrees(X, C_U) -> np.ndarray:
    """Column sums of X_b = [C_U, X]."""
    return np.concatenate([np.asarray(C_U.sum(axis=0)).ravel(), np.asarray(X.sum(axis=0)).ravel()])


def lowpass_scores(X, C_U, E: EigenSystem, *, block_size: int = DEFAULT_BLOCK) -> np.ndarray:
    """Item columns of X_b D_b^(-1/2) U U^T D_b^(1/2), an m x n dense array.

    Only the item rows of ``U^T D_b^(1/2)`` are formed, which equals
    slicing the full m x (m+n) product.
    """
    X = sp.csr_matrix(X, dtype=np.float64)
    C_U = sp.csr_matrix(C_U, dtype=np.float64)
    _check_basis(X, E)
    m, n = X.shape
    if C_U.shape != (m, m):
        raise ValueError(f"user similarity has shape {C_U.shape}, expected {(m, m)}")
    U = E.eigenvectors
    d_b = augmented_degrees(X, C_U)
    left = inv_sqrt_degrees(d_b)[:, None] * U
    right = (np.sqrt(d_b[m:])[:, None] * U[m:, :]).T
    out = np.empty((m, n), dtype=np.float64)
    if U.shape[1] == 0:
        out[:] = 0.0
        return out
    for start, stop in _blocks(m, block_size):
        proj = np.asarray(C_U[start:stop] @ left[:m]) + np.asarray(X[start:stop] @ left[m:])
        out[start:stop] = proj @ right
    return out


def fuse(F_bp, F_lp, phi: float) -> np.ndarray:
    """phi * F_bp + (1 - phi) * F_lp."""
    if not (0.0 <= phi <= 1.0):
        raise ValueError(f"fusion weight must lie in [0, 1], got {phi}")
    F_bp = np.asarray(F_bp)
    F_lp = np.asarray(F_lp)
    if F_bp.shape != F_lp.shape:
        raise ValueError(f"score shapes differ: {F_bp.shape} vs {F_lp.shape}")
    return phi * F_bp + (1.0 - phi) * F_lp
