# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Contracts mirror ``_kernels_py``."""

import numpy as np

from libc.math cimport log2, NAN, INFINITY


ctypedef long long index_t


def csr_matvec(const index_t[::1] indptr, const index_t[::1] indices,
               const double[::1] data, const double[::1] x, double[::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i
    cdef index_t p
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc = acc + data[p] * x[indices[p]]
            out[i] = acc
    return np.asarray(out)


cdef inline index_t _find(index_t[::1] parent, index_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


def union_find_components(Py_ssize_t n, const index_t[::1] rows, const index_t[::1] cols):
    parent_arr = np.arange(n, dtype=np.int64)
    size_arr = np.ones(n, dtype=np.int64)
    cdef index_t[::1] parent = parent_arr
    cdef index_t[::1] size = size_arr
    cdef Py_ssize_t count = n
    cdef Py_ssize_t e
    cdef index_t a, b, t
    with nogil:
        for e in range(rows.shape[0]):
            a = _find(parent, rows[e])
            b = _find(parent, cols[e])
            if a == b:
                continue
            if size[a] < size[b]:
                t = a
                a = b
                b = t
            parent[b] = a
            size[a] += size[b]
            count -= 1
    return count


def consecutive_pairs(const index_t[::1] indptr, const index_t[::1] items):
    cdef Py_ssize_t nseq = indptr.shape[0] - 1
    cdef Py_ssize_t total = items.shape[0]
    src_arr = np.empty(max(total - 1, 0), dtype=np.int64)
    dst_arr = np.empty(max(total - 1, 0), dtype=np.int64)
    cdef index_t[::1] src = src_arr
    cdef index_t[::1] dst = dst_arr
    cdef Py_ssize_t s, p, count = 0
    with nogil:
        for s in range(nseq):
            for p in range(indptr[s] + 1, indptr[s + 1]):
                if items[p - 1] != items[p]:
                    src[count] = items[p - 1]
                    dst[count] = items[p]
                    count += 1
    return src_arr[:count].copy(), dst_arr[:count].copy()


def topk_excluding(const double[:, ::1] scores, const index_t[::1] seen_indptr,
                   const index_t[::1] seen_indices, Py_ssize_t k,
                   index_t[:, ::1] out_items, index_t[::1] out_len):
    cdef Py_ssize_t m = scores.shape[0]
    cdef Py_ssize_t n = scores.shape[1]
    mask_arr = np.zeros(n, dtype=np.uint8)
    buf_arr = np.empty(max(k, 1), dtype=np.float64)
    cdef unsigned char[::1] mask = mask_arr
    cdef double[::1] buf = buf_arr
    cdef Py_ssize_t u, j, p, filled, pos, nseen
    cdef double s
    with nogil:
        for u in range(m):
            nseen = 0
            for p in range(seen_indptr[u], seen_indptr[u + 1]):
                if mask[seen_indices[p]] == 0:
                    mask[seen_indices[p]] = 1
                    nseen += 1
            filled = 0
            for j in range(n):
                if mask[j]:
                    continue
                s = scores[u, j]
                if filled == k and not (s > buf[k - 1]):
                    continue
                # insertion keeps earlier (lower) columns ahead on ties
                pos = filled if filled < k else k - 1
                while pos > 0 and s > buf[pos - 1]:
                    if pos < k:
                        buf[pos] = buf[pos - 1]
                        out_items[u, pos] = out_items[u, pos - 1]
                    pos -= 1
                buf[pos] = s
                out_items[u, pos] = j
                if filled < k:
                    filled += 1
            for pos in range(filled, k):
                out_items[u, pos] = -1
            out_len[u] = filled
            for p in range(seen_indptr[u], seen_indptr[u + 1]):
                mask[seen_indices[p]] = 0
    return np.asarray(out_items), np.asarray(out_len)


def ranking_metrics(const index_t[:, ::1] ranked, const index_t[::1] lengths,
                    const index_t[::1] rel_indptr, const index_t[::1] rel_indices,
                    ks, double[:, ::1] ndcg_out, double[:, ::1] mrr_out):
    cdef Py_ssize_t m = ranked.shape[0]
    cdef Py_ssize_t kmax = ranked.shape[1]
    cdef Py_ssize_t nk = len(ks)
    ks_arr = np.asarray(ks, dtype=np.int64)
    cdef index_t[::1] kv = ks_arr
    n_items = 0
    if rel_indices.shape[0]:
        n_items = int(np.max(np.asarray(rel_indices))) + 1
    if ranked.shape[0] and ranked.shape[1]:
        n_items = max(n_items, int(np.max(np.asarray(ranked))) + 1)
    mark_arr = np.zeros(max(n_items, 1), dtype=np.uint8)
    gains_arr = np.zeros(kmax + 1, dtype=np.float64)
    ideal_arr = np.zeros(kmax + 1, dtype=np.float64)
    cdef unsigned char[::1] mark = mark_arr
    cdef double[::1] gains = gains_arr
    cdef double[::1] ideal = ideal_arr
    cdef Py_ssize_t u, p, i, j, nrel, first, cut
    cdef index_t item
    cdef double acc = 0.0
    with nogil:
        for i in range(kmax):
            acc = acc + 1.0 / log2(<double>(i + 2))
            ideal[i + 1] = acc
        for u in range(m):
            nrel = 0
            for p in range(rel_indptr[u], rel_indptr[u + 1]):
                if mark[rel_indices[p]] == 0:
                    mark[rel_indices[p]] = 1
                    nrel += 1
            if nrel == 0:
                for j in range(nk):
                    ndcg_out[u, j] = NAN
                    mrr_out[u, j] = NAN
                continue
            acc = 0.0
            first = -1
            for i in range(kmax):
                if i < lengths[u]:
                    item = ranked[u, i]
                    if item >= 0 and mark[item]:
                        acc = acc + 1.0 / log2(<double>(i + 2))
                        if first < 0:
                            first = i
                gains[i + 1] = acc
            for j in range(nk):
                cut = kv[j]
                ndcg_out[u, j] = gains[cut] / ideal[nrel if nrel < cut else cut]
                if first >= 0 and first < cut:
                    mrr_out[u, j] = 1.0 / (first + 1)
                else:
                    mrr_out[u, j] = 0.0
            for p in range(rel_indptr[u], rel_indptr[u + 1]):
                mark[rel_indices[p]] = 0
    return np.asarray(ndcg_out), np.asarray(mrr_out)
