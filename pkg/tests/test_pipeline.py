import numpy as np
import pytest

from gsprec import filters, pipeline
from gsprec.config import RunConfig
from gsprec.evaluation import evaluate
from gsprec.pipeline import StageError


def synthetic_log(path, m=60, n=80, per_user=15, seed=0):
    """Interaction file with a popularity skew and some sequential structure."""
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, n + 1)
    weights /= weights.sum()
    lines = []
    for u in range(m):
        start = int(rng.integers(0, n))
        walk = [(start + k) % n for k in range(per_user // 2)]
        pop = rng.choice(n, size=per_user - len(walk), replace=False, p=weights).tolist()
        for t, i in enumerate(walk + pop):
            lines.append(f"{u + 1}\t{i + 1}\t4\t{1000 + 10 * t + u}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def config(tmp_path):
    data = synthetic_log(tmp_path / "u.data")
    return RunConfig(data_path=str(data), r=12, ks=(5, 10))


def test_run_report(config):
    report = pipeline.run(config)
    assert [row.metric for row in report.metrics.rows] == ["ndcg", "ndcg", "mrr", "mrr"]
    assert list(report.timings) == list(pipeline.STAGES)
    assert report.eigen_converged and not report.eigen_cache_hit
    text = report.to_text()
    assert "# test metrics" in text and "r = 12" in text


def test_stage_timings_cover_wall_clock(config):
    report = pipeline.run(config)
    assert abs(sum(report.timings.values()) - report.total_seconds) <= 0.05 * report.total_seconds


def test_repeat_is_identical(config):
    assert pipeline.run(config).metrics.to_csv() == pipeline.run(config).metrics.to_csv()


def test_ablation_modes_match_direct_filters(config):
    prep = pipeline.prepare(config)
    E, _ = pipeline.eigensystem(prep, config)
    C = filters.user_similarity(prep.X)
    lp = filters.lowpass_scores(prep.X, C, E)
    bp = filters.bandpass_scores(prep.X, E, filters.BandpassParams(config.center, config.width))
    for mode, Y in (("no-bandpass", lp), ("no-lowpass", bp), ("full", filters.fuse(bp, lp, config.phi))):
        expected = evaluate(Y, prep.seen_test, prep.test, config.ks).to_csv()
        assert pipeline.run(config.replace(ablation=mode)).metrics.to_csv() == expected


def test_no_bandpass_ignores_phi(config):
    a = pipeline.run(config.replace(ablation="no-bandpass", phi=0.1))
    b = pipeline.run(config.replace(ablation="no-bandpass", phi=0.9))
    assert a.metrics.to_csv() == b.metrics.to_csv()


def test_no_seq_drops_item_graph(config):
    prep = pipeline.prepare(config.replace(ablation="no-seq"))
    m = prep.X.shape[0]
    assert prep.laplacian.matrix[m:, m:].tocsr().diagonal().min() >= 0
    block = prep.laplacian.matrix[m:, m:].toarray()
    assert np.count_nonzero(block - np.diag(np.diag(block))) == 0


def test_test_ranking_excludes_train_and_validation(config):
    prep = pipeline.prepare(config)
    overlap = prep.seen_test.multiply(prep.test)
    assert overlap.nnz == 0
    assert (prep.seen_test - prep.seen_val - prep.val).nnz == 0


def test_popularity_baseline():
    import scipy.sparse as sp
    X = sp.csr_matrix(np.array([[1, 1, 1], [1, 1, 1], [1, 0, 1], [1, 0, 1], [1, 1, 1],
                                [0, 0, 1], [0, 0, 1], [0, 0, 1], [0, 0, 1]], dtype=float))
    Y = pipeline.popularity_baseline(X)
    assert Y[0].tolist() == [5, 3, 9] and np.all(Y == Y[0])
    assert np.argsort(-Y[0], kind="stable").tolist() == [2, 0, 1]
    assert not pipeline.popularity_baseline(sp.csr_matrix((3, 4))).any()


def test_run_baseline(config):
    report = pipeline.run_baseline(config)
    assert report.metrics.get("ndcg", 10).users > 0


def test_warm_cache_matches_cold(config, tmp_path):
    cached = config.replace(cache_dir=str(tmp_path / "cache"))
    cold = pipeline.run(cached)
    warm = pipeline.run(cached)
    assert not cold.eigen_cache_hit and warm.eigen_cache_hit
    assert cold.metrics.to_csv() == warm.metrics.to_csv() == pipeline.run(config).metrics.to_csv()


def test_cache_env_override(config, tmp_path, monkeypatch):
    monkeypatch.setenv("GSPREC_CACHE_DIR", str(tmp_path / "envcache"))
    pipeline.run(config)
    assert list((tmp_path / "envcache").glob("*.eig"))


def test_errors_name_their_stage(config, tmp_path):
    with pytest.raises(StageError, match=r"\[stage=ingest\]"):
        pipeline.run(config.replace(data_path=str(tmp_path / "missing")))
    with pytest.raises(StageError, match=r"\[stage=eigen\]"):
        pipeline.run(config.replace(r=10**6))


def test_manifest_and_graph_dump(config, tmp_path):
    cfg = config.replace(manifest_path=str(tmp_path / "m.tsv"), item_graph_dump=str(tmp_path / "g.txt"))
    pipeline.run(cfg)
    assert (tmp_path / "m.tsv").read_text().startswith("user\titem\tfold\n")
    assert (tmp_path / "g.txt").read_text().startswith("# shape 80 80")


def test_sweep_grid_and_order(config):
    grid = {"center": [0.8, 0.2, 0.4, 0.6], "width": [0.3, 0.1]}
    rows = pipeline.sweep(config, grid)
    assert len(rows) == 8
    keys = [(r["r"], r["center"], r["width"], r["phi"]) for r in rows]
    assert keys == sorted(keys)
    assert all(r["error"] == "" for r in rows)
    csv = pipeline.sweep_to_csv(rows, config.ks)
    assert csv.splitlines()[0].startswith("r,center,width,phi,ndcg@5,ndcg@10,mrr@5,mrr@10,val_ndcg@5")
    assert len(csv.splitlines()) == 9


def test_singleton_sweep_equals_run(config):
    row = pipeline.sweep(config, {})[0]
    report = pipeline.run(config)
    assert row["ndcg@10"] == report.metrics.get("ndcg", 10).mean
    assert row["mrr@5"] == report.metrics.get("mrr", 5).mean


def test_sweep_threads_match_serial(config):
    grid = {"center": [0.2, 0.6], "phi": [0.3, 0.7], "r": [8, 12]}
    serial = pipeline.sweep_to_csv(pipeline.sweep(config, grid), config.ks)
    threaded = pipeline.sweep_to_csv(pipeline.sweep(config.replace(threads=4), grid), config.ks)
    assert serial == threaded


def test_sweep_records_failures(config):
    rows = pipeline.sweep(config, {"r": [8, 10**6]})
    ok, bad = rows
    assert ok["error"] == "" and bad["error"].startswith("StageError")
    assert np.isnan(bad["ndcg@10"])


def test_atomic_write(tmp_path):
    target = tmp_path / "sub" / "out.csv"
    pipeline.atomic_write_text(target, "a,b\n")
    assert target.read_text() == "a,b\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.csv"]
