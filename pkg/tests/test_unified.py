import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph

from gsprec import unified
from gsprec.eigen import dense_eigh_oracle

from graph_factory import random_symmetric_graph, random_unified


def test_one_by_one_block():
    A = unified.assemble_adjacency(sp.csr_matrix([[1.0]]), sp.csr_matrix([[0.0]]))
    assert A.toarray().tolist() == [[0, 1], [1, 0]]


def test_zero_blocks():
    A = unified.assemble_adjacency(sp.csr_matrix((2, 3)), sp.csr_matrix((3, 3)))
    assert A.shape == (5, 5) and A.nnz == 0


def test_shape_mismatch():
    with pytest.raises(ValueError, match="item graph"):
        unified.assemble_adjacency(sp.csr_matrix((2, 3)), sp.csr_matrix((2, 2)))


def test_blocks_placed_raw(rng):
    X, G, L = random_unified(rng, 8, 6, 0.3)
    A = unified.assemble_adjacency(X, G.matrix).toarray()
    assert np.array_equal(A[:8, 8:], X.toarray())
    assert np.array_equal(A[8:, :8], X.toarray().T)
    assert np.array_equal(A[8:, 8:], G.matrix.toarray())
    assert not A[:8, :8].any()
    assert np.array_equal(A, A.T)


def test_k2_laplacian():
    L = unified.normalized_laplacian(sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]]))
    assert L.matrix.toarray().tolist() == [[1, -1], [-1, 1]]
    np.testing.assert_allclose(dense_eigh_oracle(L).eigenvalues, [0, 2], atol=1e-15)


def test_all_isolated_is_identity():
    L = unified.normalized_laplacian(sp.csr_matrix((4, 4)))
    assert np.array_equal(L.matrix.toarray(), np.eye(4))


def test_random_graph_spectrum_bounds(rng):
    A = random_symmetric_graph(rng, 50, 0.1)
    lam = dense_eigh_oracle(unified.normalized_laplacian(A)).eigenvalues
    assert lam.min() >= -1e-8 and lam.max() <= 2 + 1e-8


def test_quadratic_form_nonnegative(rng):
    _, _, L = random_unified(rng, 30, 40, 0.1)
    M = L.matrix
    for _ in range(100):
        x = rng.standard_normal(M.shape[0])
        x /= np.linalg.norm(x)
        assert x @ (M @ x) >= -1e-10


def test_laplacian_dense_oracle(rng):
    A = random_symmetric_graph(rng, 25, 0.2).toarray()
    A[3, :] = A[:, 3] = 0
    d = A.sum(axis=1)
    dinv = np.where(d > 0, 1 / np.sqrt(np.where(d > 0, d, 1)), 0.0)
    expected = np.eye(25) - dinv[:, None] * A * dinv[None, :]
    got = unified.normalized_laplacian(sp.csr_matrix(A)).matrix.toarray()
    np.testing.assert_allclose(got, expected, atol=1e-15)
    assert got[3, 3] == 1.0 and np.count_nonzero(got[3]) == 1


def test_components_examples():
    K2 = sp.csr_matrix([[0.0, 1.0], [1.0, 0.0]])
    assert unified.connected_components(K2) == 1
    assert unified.connected_components(sp.csr_matrix((5, 5))) == 5
    two = sp.block_diag([K2, K2]).tocsr()
    assert unified.connected_components(two) == 2


def test_components_match_scipy(rng):
    for _ in range(20):
        A = random_symmetric_graph(rng, int(rng.integers(2, 80)), float(rng.uniform(0.0, 0.1)))
        expected = csgraph.connected_components(A, directed=False)[0]
        assert unified.connected_components(A) == expected


def test_unified_records_sizes(rng):
    X, _, L = random_unified(rng, 7, 9, 0.3)
    assert (L.m, L.n) == (7, 9)
    assert L.matrix.shape == (16, 16)


def test_ml100k_shape(ml100k_path):
    from gsprec import ingest
    log = ingest.load_interactions(ml100k_path)
    X = ingest.build_interaction_matrix(log)
    A = unified.assemble_adjacency(X, sp.csr_matrix((log.n, log.n)))
    assert A.shape == (2625, 2625)
