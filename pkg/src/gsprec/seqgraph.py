"""Item-item graph from user sequences.

Pipeline: directed transitions -> undirected support -> decayed multi-hop
diffusion -> symmetric degree normalisation.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .ingest import sequences_to_csr

logger = logging.getLogger(__name__)

DEFAULT_NNZ_BUDGET = 50_000_000
DENSIFY_LIMIT = 5000


class DiffusionWarning(UserWarning):
    """Decay factor outside the range where the infinite series converges."""


class DiffusionBudgetError(MemoryError):
    pass


@dataclass(frozen=True)
class DiffusionParams:
    alpha: float = 0.4
    depth: int = 2

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.depth) != self.depth or self.depth < 1:
            raise ValueError(f"depth must be a positive integer, got {self.depth}")


@dataclass(frozen=True)
class SpectralRadius:
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True, eq=False)
class NormalizedItemGraph:
    matrix: sp.csr_matrix
    degrees: np.ndarray


def build_transition_matrix(seqs, n: int) -> sp.csr_matrix:
    """Binary n x n matrix with s_ij = 1 iff i immediately precedes j somewhere.

    Consecutive repeats of one item are dropped, so the diagonal is zero.
    """
    indptr, items = sequences_to_csr(seqs)
    if items.size and items.max() >= n:
        raise ValueError(f"item id {int(items.max())} out of range for n={n}")
    src, dst = kernels.consecutive_pairs(indptr, items)
    S = sp.csr_matrix((np.ones(src.shape[0]), (src, dst)), shape=(n, n))
    S.sum_duplicates()
    S.data[:] = 1.0
    S.sort_indices()
    return S


def symmetrize(S) -> sp.csr_matrix:
    """Undirected 0/1 support of S + S^T."""
    S = sp.csr_matrix(S)
    sym = (S + S.T).tocsr()
    sym.eliminate_zeros()
    sym.data[:] = 1.0
    sym.sort_indices()
    return sym


def estimate_spectral_radius(Sp, tol: float = 1e-10, max_iter: int = 1000) -> SpectralRadius:
    """Largest |eigenvalue| of a symmetric matrix by power iteration on its square.

    Squaring removes the +rho/-rho oscillation of bipartite graphs. Stops once
    the Rayleigh-quotient residual of the squared operator falls below
    ``tol * mu``; a non-converged estimate is still returned.
    """
    A = sp.csr_matrix(Sp, dtype=np.float64)
    n = A.shape[0]
    if n == 0 or A.nnz == 0 or not np.any(A.data):
        return SpectralRadius(0.0, 0, True)
    op = kernels.CSROperator(A)
    # a positive start vector overlaps the Perron vector of a nonnegative matrix
    x = np.ones(n) / np.sqrt(n)
    mu = 0.0
    for it in range(1, max_iter + 1):
        y = op(x)
        z = op(y)
        mu = float(y @ y)
        if mu == 0.0:
            return SpectralRadius(0.0, it, True)
        res = np.linalg.norm(z - mu * x)
        if res <= tol * mu:
            return SpectralRadius(float(np.sqrt(mu)), it, True)
        x = z / np.linalg.norm(z)
    return SpectralRadius(float(np.sqrt(mu)), max_iter, False)


def _product_nnz_bound(A, B) -> int:
    # sum_k nnz(A[:, k]) * nnz(B[k, :]) bounds nnz(A @ B)
    col_counts = np.bincount(A.indices, minlength=A.shape[1]).astype(np.int64)
    row_counts = np.diff(B.indptr).astype(np.int64)
    return int(col_counts @ row_counts)


def diffuse(Sp, params: DiffusionParams | None = None, *, nnz_budget: int = DEFAULT_NNZ_BUDGET,
            densify_limit: int = DENSIFY_LIMIT, radius: SpectralRadius | None = None) -> sp.csr_matrix:
    """Decayed multi-hop sum ``sum_{k=1..d} alpha^(k-1) S'^k``.

    Evaluated Horner-style as ``S' (I + a S' (I + a S' (...)))``. When the
    next sparse product could exceed ``nnz_budget`` nonzeros the remaining
    work is done densely for n <= ``densify_limit``; larger graphs raise
    :class:`DiffusionBudgetError`.
    """
    params = params or DiffusionParams()
    base = sp.csr_matrix(Sp, dtype=np.float64)
    n = base.shape[0]
    alpha, depth = float(params.alpha), int(params.depth)

    if depth > 1:
        radius = radius or estimate_spectral_radius(base)
        if radius.value > 0 and alpha >= 1.0 / radius.value:
            warnings.warn(
                f"alpha={alpha} >= 1/rho(S')={1.0 / radius.value:.4g}; the diffusion series only "
                f"converges for finite depth (d={depth})",
                DiffusionWarning,
                stacklevel=2,
            )

    if depth == 1:
        return base.copy()

    eye = sp.identity(n, format="csr", dtype=np.float64)
    inner = eye.copy()
    dense = None
    for _ in range(depth - 1):
        if dense is None and _product_nnz_bound(base, inner) > nnz_budget:
            if n > densify_limit:
                raise DiffusionBudgetError(
                    f"diffusion power would exceed nnz budget {nnz_budget} for n={n} > {densify_limit}"
                )
            logger.info("diffusion densified at n=%d", n)
            dense = inner.toarray()
        if dense is None:
            inner = (eye + alpha * (base @ inner)).tocsr()
        else:
            dense = np.eye(n) + alpha * (base @ dense)

    if dense is None and _product_nnz_bound(base, inner) > nnz_budget:
        if n > densify_limit:
            raise DiffusionBudgetError(f"diffusion result would exceed nnz budget {nnz_budget}")
        dense = inner.toarray()
    if dense is None:
        out = (base @ inner).tocsr()
    else:
        out = sp.csr_matrix(np.asarray(base @ dense))
    # exact symmetry; the polynomial in S' commutes with S' but rounding does not
    out = ((out + out.T) * 0.5).tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def _scale_symmetric(M, scale) -> sp.csr_matrix:
    coo = sp.coo_matrix(M)
    # scale_i * scale_j evaluated in one product keeps (i,j) and (j,i) bit-identical
    data = coo.data * (scale[coo.row] * scale[coo.col])
    out = sp.csr_matrix((data, (coo.row, coo.col)), shape=M.shape)
    out.eliminate_zeros()
    out.sort_indices()
    return out


def inv_sqrt_degrees(deg) -> np.ndarray:
    """deg^(-1/2) with zero for zero degree (pseudo-inverse convention)."""
    deg = np.asarray(deg, dtype=np.float64)
    out = np.zeros_like(deg)
    pos = deg > 0
    out[pos] = 1.0 / np.sqrt(deg[pos])
    return out


def normalize_symmetric(Sd) -> NormalizedItemGraph:
    """D^(-1/2) Sd D^(-1/2) with D the row sums; isolated items stay zero."""
    Sd = sp.csr_matrix(Sd, dtype=np.float64)
    deg = np.asarray(Sd.sum(axis=1)).ravel()
    return NormalizedItemGraph(_scale_symmetric(Sd, inv_sqrt_degrees(deg)), deg)


def build_item_graph(seqs, n: int, params: DiffusionParams | None = None, **kwargs) -> NormalizedItemGraph:
    """Sequences to normalised item graph in one call."""
    Sp = symmetrize(build_transition_matrix(seqs, n))
    return normalize_symmetric(diffuse(Sp, params, **kwargs))


def dump_coo(matrix, path) -> None:
    """Write a sparse matrix as ``row col value`` lines for inspection."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# shape {matrix.shape[0]} {matrix.shape[1]} nnz {coo.nnz}\n")
        for r, c, v in zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist()):
            fh.write(f"{r} {c} {v!r}\n")
