"""Random problem instances shared by the test modules."""

import warnings

import numpy as np
import scipy.sparse as sp

from gsprec import seqgraph, unified


def random_interactions(rng, m, n, density):
    """Binary m x n matrix with roughly ``density`` fill and per-user random sequences."""
    X = (rng.random((m, n)) < density).astype(np.float64)
    seqs = []
    for u in range(m):
        items = np.flatnonzero(X[u])
        seqs.append(rng.permutation(items))
    return sp.csr_matrix(X), seqs


def random_unified(rng, m=None, n=None, density=None, alpha=0.4, depth=2):
    """A unified Laplacian built from random interactions through the library path."""
    m = int(rng.integers(5, 60)) if m is None else m
    n = int(rng.integers(5, 60)) if n is None else n
    density = float(rng.uniform(0.01, 0.2)) if density is None else density
    X, seqs = random_interactions(rng, m, n, density)
    with warnings.catch_warnings():
        # dense random graphs routinely have alpha >= 1/rho; irrelevant for finite depth
        warnings.simplefilter("ignore", seqgraph.DiffusionWarning)
        G = seqgraph.build_item_graph(seqs, n, seqgraph.DiffusionParams(alpha, depth))
    L = unified.unified_laplacian(X, G.matrix)
    return X, G, L


def random_symmetric_graph(rng, n, p):
    """Connected-ish undirected 0/1 graph with no self loops."""
    upper = np.triu(rng.random((n, n)) < p, k=1)
    A = (upper | upper.T).astype(np.float64)
    return sp.csr_matrix(A)


def principal_angles(U, V):
    """Principal angles (radians) between the column spans of U and V."""
    Qu, _ = np.linalg.qr(U)
    Qv, _ = np.linalg.qr(V)
    s = np.linalg.svd(Qu.T @ Qv, compute_uv=False)
    return np.arccos(np.clip(s, -1.0, 1.0))


def eigen_clusters(values, gap=1e-6):
    """Index groups of numerically repeated eigenvalues (sorted input)."""
    groups, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > gap:
            groups.append(np.arange(start, i))
            start = i
    return groups
