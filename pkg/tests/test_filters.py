import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from gsprec import filters
from gsprec.eigen import EigenSystem, dense_eigh_oracle, truncated_eigh
from gsprec.filters import BandpassParams

from graph_factory import random_unified


def pinv_sqrt(d):
    return np.array([1 / math.sqrt(x) if x > 0 else 0.0 for x in d])


def naive_bandpass(X, U, g):
    """Dense X D_I^-1/2 U_I G U_I^T D_I^-1/2 with explicit n x n matrices."""
    X = X.toarray()
    m = X.shape[0]
    DI = np.diag(pinv_sqrt(X.sum(axis=0)))
    UI = U[m:]
    return X @ DI @ UI @ np.diag(g) @ UI.T @ DI


def naive_lowpass(X, U):
    """Dense X_b D_b^-1/2 U U^T D_b^1/2, item columns kept."""
    X = X.toarray()
    m = X.shape[0]
    Xu = np.diag(pinv_sqrt(X.sum(axis=1))) @ X
    Cu = Xu @ Xu.T
    Xb = np.hstack([Cu, X])
    db = Xb.sum(axis=0)
    full = Xb @ np.diag(pinv_sqrt(db)) @ U @ U.T @ np.diag(np.sqrt(db))
    return full[:, m:]


def basis(L, r):
    return truncated_eigh(L, r)


def system(U, lam=None):
    r = U.shape[1]
    lam = np.linspace(0, 1, r) if lam is None else lam
    return EigenSystem(np.asarray(lam, float), np.asarray(U, float), np.zeros(r), np.ones(r, bool))


class TestKernel:
    def test_peak(self):
        p = BandpassParams(0.2, 0.1)
        lam = np.array([0.0, 0.2, 1.0])
        assert filters.gaussian_kernel(lam, p)[1] == 1.0

    def test_half_height(self):
        lam_bar = 0.2 + math.sqrt(0.1 * math.log(2))
        assert abs(lam_bar - 0.46326) < 1e-4  # quoted value is rounded; exact is 0.463277
        g = filters.gaussian_kernel(np.array([0.0, lam_bar, 1.0]), BandpassParams(0.2, 0.1))
        assert g[1] == pytest.approx(0.5, abs=1e-15)

    def test_wide_window_tends_to_one(self):
        lam = np.array([0.0, 0.9, 1.0])
        values = [filters.gaussian_kernel(lam, BandpassParams(0.2, w))[1] for w in (0.1, 1, 10, 1e3, 1e6)]
        assert np.all(np.diff(values) > 0) and values[-1] > 1 - 1e-6

    def test_normalization_over_retained(self):
        np.testing.assert_allclose(filters.normalized_eigenvalues([0.1, 0.3, 0.5]), [0, 0.5, 1])
        assert filters.normalized_eigenvalues([0.4, 0.4]).tolist() == [0, 0]
        with pytest.raises(ValueError):
            filters.normalized_eigenvalues([])

    @given(c=st.floats(0, 1), w=st.floats(0.01, 10), delta=st.floats(0, 1))
    def test_bounds_and_symmetry(self, c, w, delta):
        lo, hi = c - delta, c + delta
        lam = np.array([0.0, 1.0, min(max(lo, 0.0), 1.0), min(hi, 1.0)])
        g = filters.gaussian_kernel(lam, BandpassParams(c, w))
        assert np.all(g > 0) and np.all(g <= 1)
        if lo >= 0 and hi <= 1:
            assert g[2] == pytest.approx(g[3], rel=1e-12, abs=1e-300)

    def test_params_validated(self):
        with pytest.raises(ValueError):
            BandpassParams(1.5, 0.1)
        with pytest.raises(ValueError):
            BandpassParams(0.5, 0.0)


def test_bandpass_identity_filter():
    X = sp.csr_matrix(np.array([[1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]))
    m, n = X.shape
    U = np.vstack([np.zeros((m, n)), np.eye(n)])
    F = filters.bandpass_scores(X, system(U), weights=np.ones(n))
    d = X.toarray().sum(axis=0)
    np.testing.assert_allclose(F, X.toarray() / d, atol=1e-15)


def test_bandpass_zero_kernel(rng):
    X, _, L = random_unified(rng, 6, 7, 0.4)
    assert not filters.bandpass_scores(X, basis(L, 4), weights=np.zeros(4)).any()


def test_toy_two_by_two():
    X = sp.csr_matrix(np.array([[1.0, 0.0], [1.0, 1.0]]))
    from gsprec import unified
    L = unified.unified_laplacian(X, sp.csr_matrix((2, 2)))
    E = dense_eigh_oracle(L)
    g = filters.gaussian_kernel(E.eigenvalues, BandpassParams(0.2, 0.1))
    np.testing.assert_allclose(filters.bandpass_scores(X, E, BandpassParams(0.2, 0.1)),
                               naive_bandpass(X, E.eigenvectors, g), atol=1e-14)
    E1 = system(E.eigenvectors[:, :1], [0.0])
    C = filters.user_similarity(X)
    np.testing.assert_allclose(filters.lowpass_scores(X, C, E1), naive_lowpass(X, E1.eigenvectors),
                               atol=1e-14)


def test_lowpass_full_basis_reproduces_x(rng):
    X, _, L = random_unified(rng, 6, 8, 0.4)
    E = dense_eigh_oracle(L)
    F = filters.lowpass_scores(X, filters.user_similarity(X), E)
    np.testing.assert_allclose(F, X.toarray(), atol=1e-12)


def test_lowpass_empty_basis(rng):
    X, _, _ = random_unified(rng, 6, 8, 0.4)
    E = system(np.zeros((14, 0)), [])
    assert not filters.lowpass_scores(X, filters.user_similarity(X), E).any()


def test_user_similarity_examples():
    same = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    C = filters.user_similarity(same).toarray()
    assert C[0, 1] == C[0, 0]
    disjoint = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert filters.user_similarity(disjoint).toarray()[0, 1] == 0
    X = np.array([[1.0, 1, 0], [0, 1, 1], [1, 0, 0]])
    Xu = X / np.sqrt(X.sum(axis=1))[:, None]
    np.testing.assert_allclose(filters.user_similarity(sp.csr_matrix(X)).toarray(), Xu @ Xu.T, atol=1e-15)


@pytest.mark.parametrize("block", [1, 3, 2048])
def test_dense_oracle_equivalence(rng, block):
    for _ in range(5):
        X, _, L = random_unified(rng, int(rng.integers(3, 40)), int(rng.integers(3, 40)), 0.2)
        N = L.matrix.shape[0]
        r = int(min(N, rng.integers(1, 16)))
        E = basis(L, r)
        p = BandpassParams(float(rng.uniform(0, 1)), float(rng.uniform(0.05, 1)))
        g = filters.gaussian_kernel(E.eigenvalues, p)
        bp = filters.bandpass_scores(X, E, p, block_size=block)
        assert np.max(np.abs(bp - naive_bandpass(X, E.eigenvectors, g))) <= 1e-8
        lp = filters.lowpass_scores(X, filters.user_similarity(X), E, block_size=block)
        assert np.max(np.abs(lp - naive_lowpass(X, E.eigenvectors))) <= 1e-8


def test_sign_flip_invariance(rng):
    X, _, L = random_unified(rng, 20, 25, 0.2)
    E = basis(L, 10)
    flips = np.where(rng.random(10) < 0.5, -1.0, 1.0)
    Ef = system(E.eigenvectors * flips, E.eigenvalues)
    p = BandpassParams(0.4, 0.2)
    C = filters.user_similarity(X)
    assert np.max(np.abs(filters.bandpass_scores(X, E, p) - filters.bandpass_scores(X, Ef, p))) <= 1e-12
    assert np.max(np.abs(filters.lowpass_scores(X, C, E) - filters.lowpass_scores(X, C, Ef))) <= 1e-12


def test_linear_in_signal(rng):
    X, _, L = random_unified(rng, 10, 12, 0.3)
    E = basis(L, 6)
    g = filters.gaussian_kernel(E.eigenvalues, BandpassParams(0.3, 0.2))
    deg = filters.DegreeVectors.from_interactions(X)
    X1 = sp.csr_matrix(rng.standard_normal((10, 12)))
    X2 = sp.csr_matrix(rng.standard_normal((10, 12)))
    f = lambda S: filters.bandpass_scores(S, E, weights=g, degrees=deg)  # noqa: E731
    np.testing.assert_allclose(f(2.0 * X1 - 0.5 * X2), 2.0 * f(X1) - 0.5 * f(X2), atol=1e-12)


def test_fusion_affine_in_phi(rng):
    A, B = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    y0, y1 = filters.fuse(A, B, 0.0), filters.fuse(A, B, 1.0)
    assert np.array_equal(y0, B) and np.array_equal(y1, A)
    for lo, mid, hi in ((0.2, 0.5, 0.8), (0.0, 0.3, 0.6)):
        interp = filters.fuse(A, B, lo) + (mid - lo) / (hi - lo) * (filters.fuse(A, B, hi) - filters.fuse(A, B, lo))
        assert np.max(np.abs(interp - filters.fuse(A, B, mid))) <= 1e-12


def test_fusion_toy():
    bp = np.array([[1.0, 0.0], [0.5, 2.0]])
    lp = np.array([[0.0, 1.0], [1.5, 1.0]])
    np.testing.assert_allclose(filters.fuse(bp, lp, 0.3), [[0.3, 0.7], [1.2, 1.3]], atol=1e-15)


def test_fusion_errors():
    with pytest.raises(ValueError):
        filters.fuse(np.zeros((2, 2)), np.zeros((2, 2)), 1.5)
    with pytest.raises(ValueError):
        filters.fuse(np.zeros((2, 2)), np.zeros((2, 3)), 0.5)


def test_shape_mismatch_rejected(rng):
    X, _, L = random_unified(rng, 6, 7, 0.4)
    E = basis(L, 3)
    with pytest.raises(ValueError):
        filters.bandpass_scores(X[:, :5], E, BandpassParams(0.2, 0.1))
    with pytest.raises(ValueError):
        filters.lowpass_scores(X, sp.identity(5, format="csr"), E)
