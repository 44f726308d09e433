"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--users 943 --items 1682 --repeat 5]

Inputs are sized like MovieLens 100K by default: a unified Laplacian of
m + n nodes for the mat-vec, an m x n score matrix for top-k and metrics.
"""

import argparse
import time
import warnings

import numpy as np
import scipy.sparse as sp

from gsprec import kernels, seqgraph, unified


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def build_inputs(m, n, density, seed):
    rng = np.random.default_rng(seed)
    X = sp.random(m, n, density=density, random_state=seed, format="csr")
    X.data[:] = 1.0
    seqs = [rng.permutation(X[u].indices) for u in range(m)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", seqgraph.DiffusionWarning)
        G = seqgraph.build_item_graph(seqs, n)
    L = unified.unified_laplacian(X, G.matrix).matrix
    scores = rng.random((m, n))
    rel = sp.random(m, n, density=0.01, random_state=seed + 1, format="csr")
    return X, L, seqs, scores, rel


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=943)
    ap.add_argument("--items", type=int, default=1682)
    ap.add_argument("--density", type=float, default=0.05)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    X, L, seqs, scores, rel = build_inputs(args.users, args.items, args.density, args.seed)
    indptr, items = seqgraph.sequences_to_csr(seqs)
    coo = sp.coo_matrix(L)
    x = np.random.default_rng(args.seed).standard_normal(L.shape[0])
    block = np.random.default_rng(args.seed).standard_normal((L.shape[0], 32))
    seen_p, seen_i = X.indptr.astype(np.int64), X.indices.astype(np.int64)
    rel_p, rel_i = rel.indptr.astype(np.int64), rel.indices.astype(np.int64)

    backends = kernels.available_backends()
    results = {}
    for name in backends:
        op = kernels.CSROperator(L, name)
        ranked, lengths = kernels.topk_excluding(scores, seen_p, seen_i, 20, name)
        cases = {
            "csr matvec": lambda: op(x),
            "csr matmat (32 cols)": lambda: op.matmat(block),
            "union-find components": lambda: kernels.union_find_components(L.shape[0], coo.row, coo.col, name),
            "consecutive pairs": lambda: kernels.consecutive_pairs(indptr, items, name),
            "top-20 with exclusion": lambda: kernels.topk_excluding(scores, seen_p, seen_i, 20, name),
            "ndcg/mrr @5,10,20": lambda: kernels.ranking_metrics(ranked, lengths, rel_p, rel_i, [5, 10, 20], name),
        }
        results[name] = {case: best_of(fn, args.repeat) for case, fn in cases.items()}

    print(f"N={L.shape[0]} nnz(L)={L.nnz} scores={scores.shape} best of {args.repeat}")
    header = f"{'kernel':<26}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10}"
    print(header)
    for case in results[backends[0]]:
        line = f"{case:<26}" + "".join(f"{results[b][case] * 1e3:>10.3f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{results['python'][case] / results['cython'][case]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
