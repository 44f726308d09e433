"""Reference implementations of the hot loops, numpy/pure Python only.

Every function here has the same signature and output contract as its
counterpart in ``_kernels.pyx``; the compiled module is preferred at import
time (see :mod:`gsprec.kernels`).
"""

import numpy as np


def csr_matvec(indptr, indices, data, x, out):
    """``out[:] = A @ x`` for a CSR matrix given by its three arrays."""
    if data.shape[0] == 0:
        out[:] = 0.0
        return out
    prod = data * x[indices]
    # reduceat mis-handles empty rows; mask them afterwards
    starts = indptr[:-1]
    nonempty = indptr[1:] > starts
    out[:] = 0.0
    if nonempty.any():
        sums = np.add.reduceat(prod, starts[nonempty])
        out[np.flatnonzero(nonempty)] = sums
    return out


def union_find_components(n, rows, cols):
    """Number of connected components of an n-node graph given as an edge list."""
    parent = list(range(n))
    size = [1] * n
    count = n
    for a, b in zip(rows.tolist(), cols.tolist()):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        count -= 1
    return count


def consecutive_pairs(indptr, items):
    """Directed (prev, next) pairs of consecutive distinct items within each sequence."""
    items = np.asarray(items, dtype=np.int64)
    if items.shape[0] < 2:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy()
    src = items[:-1]
    dst = items[1:]
    # a pair is valid only when both ends live in the same sequence
    same_seq = np.ones(items.shape[0] - 1, dtype=bool)
    bounds = np.asarray(indptr[1:-1], dtype=np.int64)
    bounds = bounds[(bounds > 0) & (bounds < items.shape[0])]
    same_seq[bounds - 1] = False
    keep = same_seq & (src != dst)
    return src[keep].copy(), dst[keep].copy()


def topk_excluding(scores, seen_indptr, seen_indices, k, out_items, out_len):
    """Per-row top-k by descending score, ties to the lower column, skipping seen columns.

    ``out_items`` is padded with -1 past ``out_len[u]``.
    """
    m, n = scores.shape
    out_items[:] = -1
    block = 256
    for start in range(0, m, block):
        stop = min(start + block, m)
        work = np.array(scores[start:stop], dtype=np.float64, copy=True)
        seen_count = np.zeros(stop - start, dtype=np.int64)
        for u in range(start, stop):
            cols = seen_indices[seen_indptr[u]:seen_indptr[u + 1]]
            work[u - start, cols] = -np.inf
            seen_count[u - start] = np.unique(cols).shape[0]
        order = np.argsort(-work, axis=1, kind="stable")
        for u in range(start, stop):
            length = min(k, n - int(seen_count[u - start]))
            out_len[u] = length
            out_items[u, :length] = order[u - start, :length]
    return out_items, out_len


def ranking_metrics(ranked, lengths, rel_indptr, rel_indices, ks, ndcg_out, mrr_out):
    """NDCG@k and MRR@k per user (rows of the outputs) and cutoff (columns).

    Users without relevant items get NaN.
    """
    m = ranked.shape[0]
    kmax = ranked.shape[1]
    discounts = 1.0 / np.log2(np.arange(2, kmax + 2, dtype=np.float64))
    ideal = np.concatenate([[0.0], np.cumsum(discounts)])
    ndcg_out[:] = np.nan
    mrr_out[:] = np.nan
    for u in range(m):
        rel = rel_indices[rel_indptr[u]:rel_indptr[u + 1]]
        if rel.shape[0] == 0:
            continue
        nrel = np.unique(rel).shape[0]
        row = ranked[u, :lengths[u]]
        hits = np.isin(row, rel).astype(np.float64)
        padded = np.zeros(kmax)
        padded[:hits.shape[0]] = hits
        gains = np.cumsum(padded * discounts)
        first = np.flatnonzero(padded)
        for j, k in enumerate(ks):
            ndcg_out[u, j] = gains[k - 1] / ideal[min(nrel, k)]
            if first.shape[0] and first[0] < k:
                mrr_out[u, j] = 1.0 / (first[0] + 1)
            else:
                mrr_out[u, j] = 0.0
    return ndcg_out, mrr_out
