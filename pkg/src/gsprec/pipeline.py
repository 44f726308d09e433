"""End-to-end runs, ablations, the popularity baseline and parameter sweeps."""

from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import tempfile
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import eigcache, filters, ingest, kernels, seqgraph, unified
from .config import SWEEP_KEYS, RunConfig
from .eigen import EigenSystem, truncated_eigh
from .evaluation import MetricTable, evaluate, interactions_csr

logger = logging.getLogger(__name__)

STAGES = ("ingest", "seqgraph", "unified", "eigen", "filters", "eval")


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage it happened in."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[stage={stage}] {type(cause).__name__}: {cause}")


@dataclass
class RunReport:
    config: RunConfig
    metrics: MetricTable
    validation: MetricTable
    timings: dict
    total_seconds: float
    warnings: list = field(default_factory=list)
    eigen_cache_hit: bool = False
    eigen_converged: bool = True
    backend: str = kernels.BACKEND

    def to_text(self) -> str:
        lines = ["# config", self.config.echo().rstrip("\n"), "", "# test metrics",
                 self.metrics.to_text().rstrip("\n"), "", "# validation metrics",
                 self.validation.to_text().rstrip("\n"), "", "# timings (s)"]
        for stage, secs in self.timings.items():
            lines.append(f"{stage:<10}{secs:10.3f}")
        lines.append(f"{'total':<10}{self.total_seconds:10.3f}")
        lines.append(f"eigen cache hit: {self.eigen_cache_hit}; kernels: {self.backend}")
        if self.warnings:
            lines += ["", "# warnings"] + [f"- {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


class _Stages:
    def __init__(self):
        self.timings = {}
        self.warnings = []

    @contextmanager
    def __call__(self, name):
        start = time.perf_counter()
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                yield
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
            finally:
                self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start
                for w in caught:
                    msg = f"{name}: {w.message}"
                    if msg not in self.warnings:
                        self.warnings.append(msg)
                    logger.warning("%s", msg)


@dataclass(frozen=True, eq=False)
class Prepared:
    """Everything up to and including the Laplacian, shared across sweep points."""

    split: ingest.DatasetSplit
    X: sp.csr_matrix
    item_graph: seqgraph.NormalizedItemGraph
    laplacian: unified.NormalizedLaplacian
    seen_val: sp.csr_matrix
    seen_test: sp.csr_matrix
    val: sp.csr_matrix
    test: sp.csr_matrix


def prepare(config: RunConfig, stages: _Stages | None = None) -> Prepared:
    stages = stages or _Stages()
    with stages("ingest"):
        if not config.data_path:
            raise ValueError("data_path is not set")
        log = ingest.load_interactions(config.data_path, config.column_format())
        ds = ingest.split(log, config.split_ratios, config.seed, config.split_strategy)
        if config.manifest_path:
            ingest.write_split_manifest(ds, config.manifest_path)
        X = ingest.build_interaction_matrix(ds.train)
        seqs = ingest.build_user_sequences(ds.train)
    with stages("seqgraph"):
        if config.ablation == "no-seq":
            n = X.shape[1]
            item_graph = seqgraph.NormalizedItemGraph(sp.csr_matrix((n, n)), np.zeros(n))
        else:
            params = seqgraph.DiffusionParams(config.alpha, config.depth)
            item_graph = seqgraph.build_item_graph(seqs, X.shape[1], params)
        if config.item_graph_dump:
            seqgraph.dump_coo(item_graph.matrix, config.item_graph_dump)
    with stages("unified"):
        L = unified.unified_laplacian(X, item_graph.matrix)
    with stages("eval"):
        train = interactions_csr(ds.train)
        val = interactions_csr(ds.validation)
        test = interactions_csr(ds.test)
        seen_test = ((train + val) > 0).astype(np.float64).tocsr()
    return Prepared(ds, X, item_graph, L, train, seen_test, val, test)


def eigensystem(prep: Prepared, config: RunConfig, r: int | None = None,
                stages: _Stages | None = None, memo: dict | None = None) -> tuple[EigenSystem, bool]:
    """Eigenpairs for ``r`` (default ``config.r``), from memo, disk cache, or the solver."""
    stages = stages or _Stages()
    r = config.r if r is None else int(r)
    with stages("eigen"):
        if memo is not None and r in memo:
            return memo[r], True
        max_iter = config.eig_max_iter or None
        seed = config.seed
        cache_dir = eigcache.resolve_cache_dir(config.cache_dir)
        E, hit = None, False
        key = None
        if cache_dir is not None:
            key = eigcache.content_key(prep.laplacian.matrix, r, config.eig_tol, seed)
            E = eigcache.cache_load(key, cache_dir)
            hit = E is not None
        if E is None:
            E = truncated_eigh(prep.laplacian, r, tol=config.eig_tol, max_iter=max_iter, seed=seed)
            if cache_dir is not None:
                eigcache.cache_store(E, key, cache_dir)
        if memo is not None:
            memo[r] = E
        return E, hit


def popularity_baseline(train) -> np.ndarray:
    """Every user's row is the global per-item interaction count."""
    X = train if sp.issparse(train) else interactions_csr(train)
    counts = np.asarray(X.sum(axis=0)).ravel().astype(np.float64)
    return np.tile(counts, (X.shape[0], 1))


class _Scorer:
    """Caches the pieces of Y that sweep points share."""

    def __init__(self, prep: Prepared, block_size: int):
        self.prep = prep
        self.block_size = block_size
        self.degrees = filters.DegreeVectors.from_interactions(prep.X)
        self._cu = None
        self._lp = {}
        self._bp = {}

    def user_similarity(self):
        if self._cu is None:
            self._cu = filters.user_similarity(self.prep.X, self.degrees)
        return self._cu

    def lowpass(self, E, r):
        # one entry per cache: points arrive ordered with phi innermost
        cached = self._lp
        if r not in cached:
            cached = {r: filters.lowpass_scores(self.prep.X, self.user_similarity(), E,
                                                block_size=self.block_size)}
            self._lp = cached
        return cached[r]

    def bandpass(self, E, r, center, width):
        key = (r, center, width)
        cached = self._bp
        if key not in cached:
            cached = {key: filters.bandpass_scores(
                self.prep.X, E, filters.BandpassParams(center, width),
                degrees=self.degrees, block_size=self.block_size)}
            self._bp = cached
        return cached[key]

    def scores(self, E, r, center, width, phi, ablation):
        if ablation == "no-bandpass":
            return self.lowpass(E, r)
        if ablation == "no-lowpass":
            return self.bandpass(E, r, center, width)
        return filters.fuse(self.bandpass(E, r, center, width), self.lowpass(E, r), phi)


def _evaluate_both(prep: Prepared, Y, ks):
    test = evaluate(Y, prep.seen_test, prep.test, ks)
    val = evaluate(Y, prep.seen_val, prep.val, ks)
    return test, val


def run(config: RunConfig) -> RunReport:
    """Ingest, graph construction, eigendecomposition, filtering and evaluation."""
    stages = _Stages()
    start = time.perf_counter()
    prep = prepare(config, stages)
    E, hit = eigensystem(prep, config, stages=stages)
    with stages("filters"):
        Y = _Scorer(prep, config.block_size).scores(E, config.r, config.center, config.width,
                                                    config.phi, config.ablation)
    with stages("eval"):
        test, val = _evaluate_both(prep, Y, config.ks)
    total = time.perf_counter() - start
    timings = {s: stages.timings.get(s, 0.0) for s in STAGES}
    return RunReport(config, test, val, timings, total, stages.warnings, hit, E.all_converged)


def run_baseline(config: RunConfig) -> RunReport:
    """Popularity ranking on the same split as :func:`run`."""
    stages = _Stages()
    start = time.perf_counter()
    with stages("ingest"):
        log = ingest.load_interactions(config.data_path, config.column_format())
        ds = ingest.split(log, config.split_ratios, config.seed, config.split_strategy)
    with stages("filters"):
        train = interactions_csr(ds.train)
        Y = popularity_baseline(train)
    with stages("eval"):
        val = interactions_csr(ds.validation)
        seen_test = ((train + val) > 0).astype(np.float64).tocsr()
        test = evaluate(Y, seen_test, interactions_csr(ds.test), config.ks)
        valm = evaluate(Y, train, val, config.ks)
    total = time.perf_counter() - start
    timings = {s: stages.timings.get(s, 0.0) for s in ("ingest", "filters", "eval")}
    return RunReport(config, test, valm, timings, total, stages.warnings, False, True)


def _metric_columns(ks):
    ks = sorted(set(ks))
    return [f"{m}@{k}" for m in ("ndcg", "mrr") for k in ks]


def grid_points(config: RunConfig, grid: dict) -> list[dict]:
    """Cartesian product in (r, center, width, phi) order; unspecified keys take config values."""
    axes = [sorted(set(grid.get(k, [getattr(config, k)]))) for k in SWEEP_KEYS]
    return [dict(zip(SWEEP_KEYS, combo)) for combo in itertools.product(*axes)]


def sweep(config: RunConfig, grid: dict) -> list[dict]:
    """One evaluation per grid point; eigenpairs are computed once per r.

    Failures at a point are recorded in its ``error`` field and the sweep
    continues. Rows come back sorted by (r, center, width, phi).
    """
    stages = _Stages()
    prep = prepare(config, stages)
    scorer = _Scorer(prep, config.block_size)
    memo = {}
    points = grid_points(config, grid)
    cols = _metric_columns(config.ks)

    def point(params):
        row = dict(params)
        try:
            E, _ = eigensystem(prep, config, params["r"], memo=memo)
            Y = scorer.scores(E, params["r"], params["center"], params["width"], params["phi"],
                              config.ablation)
            test, val = _evaluate_both(prep, Y, config.ks)
            for row_m in test.rows:
                row[f"{row_m.metric}@{row_m.k}"] = row_m.mean
            for row_m in val.rows:
                row[f"val_{row_m.metric}@{row_m.k}"] = row_m.mean
            row["error"] = ""
        except Exception as exc:  # noqa: BLE001
            logger.warning("sweep point %s failed: %s", params, exc)
            for c in cols:
                row.setdefault(c, float("nan"))
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    # eigenpairs first (serially) so concurrent points never race on one r
    for r in sorted({p["r"] for p in points}):
        try:
            eigensystem(prep, config, r, memo=memo)
        except StageError as exc:
            logger.warning("eigendecomposition for r=%d failed: %s", r, exc)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(point, points))
    else:
        rows = [point(p) for p in points]
    rows.sort(key=lambda row: tuple(row[k] for k in SWEEP_KEYS))
    return rows


def sweep_to_csv(rows: list[dict], ks) -> str:
    cols = list(SWEEP_KEYS) + _metric_columns(ks) + ["val_" + c for c in _metric_columns(ks)] + ["error"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        out = []
        for c in cols:
            v = row.get(c, "")
            out.append(f"{v:.10f}" if isinstance(v, float) and c not in SWEEP_KEYS else v)
        writer.writerow(out)
    return buf.getvalue()


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
