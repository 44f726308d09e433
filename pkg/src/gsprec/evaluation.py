"""Top-k ranking with seen-item exclusion, NDCG@k and MRR@k."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels

DEFAULT_KS = (5, 10, 20)


class EvaluationWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class RankingResult:
    """Ranked item ids per user, padded with -1 after ``lengths[u]``."""

    items: np.ndarray
    lengths: np.ndarray

    def for_user(self, u: int) -> list[int]:
        return self.items[u, :self.lengths[u]].tolist()


@dataclass(frozen=True)
class MetricRow:
    metric: str
    k: int
    mean: float
    se: float
    users: int


@dataclass(frozen=True)
class MetricTable:
    rows: tuple

    def get(self, metric: str, k: int) -> MetricRow:
        for row in self.rows:
            if row.metric == metric and row.k == k:
                return row
        raise KeyError((metric, k))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "k", "mean", "se", "users"])
        for row in self.rows:
            writer.writerow([row.metric, row.k, f"{row.mean:.10f}", f"{row.se:.10f}", row.users])
        return buf.getvalue()

    def to_text(self) -> str:
        if not self.rows:
            return "(no evaluable users)\n"
        lines = [f"{'metric':<8}{'k':>4}{'mean':>10}{'se':>10}{'users':>8}"]
        for row in self.rows:
            lines.append(f"{row.metric:<8}{row.k:>4}{row.mean:>10.4f}{row.se:>10.4f}{row.users:>8d}")
        return "\n".join(lines) + "\n"


def _as_sets_csr(obj, m: int):
    """Per-user item collections as (indptr, indices). Accepts CSR or a list of iterables."""
    if sp.issparse(obj):
        M = sp.csr_matrix(obj)
        M.eliminate_zeros()
        return M.indptr.astype(np.int64), M.indices.astype(np.int64)
    if obj is None:
        return np.zeros(m + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    rows = [np.unique(np.asarray(list(s), dtype=np.int64)) for s in obj]
    if len(rows) != m:
        raise ValueError(f"expected {m} per-user sets, got {len(rows)}")
    indptr = np.concatenate([[0], np.cumsum([len(s) for s in rows])]).astype(np.int64)
    indices = np.concatenate(rows) if rows else np.empty(0, dtype=np.int64)
    return indptr, indices.astype(np.int64)


def rank_topk(Y, seen, k: int) -> RankingResult:
    """Descending-score top-k per user, skipping ``seen`` items; ties go to the lower item id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m = Y.shape[0]
    indptr, indices = _as_sets_csr(seen, m)
    items, lengths = kernels.topk_excluding(Y, indptr, indices, int(k))
    return RankingResult(items, lengths)


def _per_user(ranked: RankingResult, relevant, ks):
    m = ranked.items.shape[0]
    ks = [int(k) for k in ks]
    items = ranked.items
    if max(ks) > items.shape[1]:
        # a short ranking simply has empty slots past its end
        pad = np.full((m, max(ks) - items.shape[1]), -1, dtype=items.dtype)
        items = np.hstack([items, pad])
    indptr, indices = _as_sets_csr(relevant, m)
    return kernels.ranking_metrics(items, ranked.lengths, indptr, indices, ks)


def ndcg_at_k(ranked: RankingResult, relevant, k: int):
    """Per-user NDCG@k (NaN for users without relevant items) and the mean over the rest.

    DCG uses 1/log2(rank+1); the ideal DCG places min(|relevant|, k) hits first.
    """
    ndcg, _ = _per_user(ranked, relevant, [k])
    per_user = ndcg[:, 0]
    valid = ~np.isnan(per_user)
    return per_user, float(per_user[valid].mean()) if valid.any() else float("nan")


def mrr_at_k(ranked: RankingResult, relevant, k: int):
    """Per-user reciprocal rank of the first hit within the top k (0 if none)."""
    _, mrr = _per_user(ranked, relevant, [k])
    per_user = mrr[:, 0]
    valid = ~np.isnan(per_user)
    return per_user, float(per_user[valid].mean()) if valid.any() else float("nan")


def _mean_se(values):
    count = values.shape[0]
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return mean, se


def evaluate(Y, seen, test, ks=DEFAULT_KS) -> MetricTable:
    """NDCG and MRR at every k with standard errors over users that have test items.

    ``seen`` holds the items excluded from each user's ranking and ``test`` the
    relevant ones; both may be CSR matrices or per-user collections.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    m = Y.shape[0]
    ks = sorted({int(k) for k in ks})
    t_indptr, t_indices = _as_sets_csr(test, m)
    if t_indices.shape[0] == 0:
        warnings.warn("test fold is empty; returning an empty metric table", EvaluationWarning,
                      stacklevel=2)
        return MetricTable(())
    ranked = rank_topk(Y, seen, max(ks))
    ndcg, mrr = kernels.ranking_metrics(ranked.items, ranked.lengths, t_indptr, t_indices, ks)
    eligible = np.diff(t_indptr) > 0
    rows = []
    for name, table in (("ndcg", ndcg), ("mrr", mrr)):
        for j, k in enumerate(ks):
            mean, se = _mean_se(table[eligible, j])
            rows.append(MetricRow(name, k, mean, se, int(eligible.sum())))
    return MetricTable(tuple(rows))


def interactions_csr(log) -> sp.csr_matrix:
    """Binary m x n matrix of a fold, for use as ``seen`` or ``test``."""
    M = sp.csr_matrix((np.ones(len(log)), (log.users, log.items)), shape=(log.m, log.n))
    M.sum_duplicates()
    M.data[:] = 1.0
    return M
