"""Truncated symmetric eigendecomposition for the smallest eigenpairs of L.

The solver is a thick-restart Lanczos method with full (two-pass classical
Gram-Schmidt) reorthogonalisation and locking of converged Ritz pairs.
Single-vector Krylov methods cannot see a second copy of a repeated
eigenvalue in exact arithmetic, so after the main run the operator is
deflated by the locked vectors and searched again from a fresh random
vector; anything smaller than the current largest locked value is swapped in.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels

logger = logging.getLogger(__name__)

DENSE_ORACLE_LIMIT = 2000


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues with column eigenvectors and residual norms."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    converged: np.ndarray
    iterations: int = 0

    def __post_init__(self):
        for arr in (self.eigenvalues, self.eigenvectors, self.residuals, self.converged):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return int(self.eigenvalues.shape[0])

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def item_block(self, m: int) -> np.ndarray:
        """Rows of the eigenvectors belonging to items (after the m user rows)."""
        return self.eigenvectors[m:, :]


def sign_normalize(U: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    U = np.array(U, dtype=np.float64, copy=True)
    if U.size == 0:
        return U
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def _as_csr(L) -> sp.csr_matrix:
    mat = getattr(L, "matrix", L)
    return sp.csr_matrix(mat, dtype=np.float64)


def _orthogonalize(w, blocks):
    # two passes of classical Gram-Schmidt against every block
    for _ in range(2):
        for Q in blocks:
            if Q.shape[1]:
                w -= Q @ (Q.T @ w)
    return w


def _random_unit(rng, N, blocks):
    for _ in range(10):
        w = _orthogonalize(rng.standard_normal(N), blocks)
        nrm = np.linalg.norm(w)
        if nrm > 1e-8:
            return w / nrm
    raise RuntimeError("could not draw a vector outside the current subspace")


@dataclass
class _Budget:
    left: int
    used: int = 0

    def take(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        self.used += 1
        return True


def _thick_restart(op, N, want, Y, rng, tol, ncv, budget):
    """Smallest ``want`` eigenpairs of ``op`` on the orthogonal complement of Y.

    Returns (values, vectors, residuals, converged) sorted ascending, at most
    ``want`` columns. Runs until all are locked or the cycle budget is spent.
    """
    free = N - Y.shape[1]
    want = min(want, free)
    if want <= 0:
        return np.empty(0), np.empty((N, 0)), np.empty(0), np.empty(0, dtype=bool)
    V = np.zeros((N, min(ncv, free)))
    AV = np.zeros_like(V)
    lock_vals, lock_vecs, lock_res = [], [], []
    V[:, 0] = _random_unit(rng, N, [Y])
    kept = 0
    best = None

    while budget.take():
        locked = np.column_stack(lock_vecs) if lock_vecs else np.empty((N, 0))
        defl = [Y, locked]
        width = min(V.shape[1], free - locked.shape[1])
        for i in range(kept, width):
            AV[:, i] = op(V[:, i])
            if i + 1 < width:
                w = AV[:, i].copy()
                wnorm = np.linalg.norm(w)
                w = _orthogonalize(w, defl + [V[:, :i + 1]])
                beta = np.linalg.norm(w)
                if beta <= max(1e-10 * wnorm, 1e-14):
                    # invariant subspace reached; continue from a fresh direction
                    V[:, i + 1] = _random_unit(rng, N, defl + [V[:, :i + 1]])
                else:
                    V[:, i + 1] = w / beta

        Vw, AVw = V[:, :width], AV[:, :width]
        T = Vw.T @ AVw
        T = 0.5 * (T + T.T)
        theta, S = np.linalg.eigh(T)
        X = Vw @ S
        AX = AVw @ S
        res = np.linalg.norm(AX - X * theta, axis=0)

        need = want - len(lock_vals)
        newly = [j for j in range(min(need, width)) if res[j] <= tol]
        for j in newly:
            lock_vals.append(theta[j])
            lock_vecs.append(X[:, j].copy())
            lock_res.append(res[j])
        best = (theta, X, res, set(newly))
        if len(lock_vals) >= want:
            break

        # continuation vector: Lanczos residual of the last basis vector
        f = _orthogonalize(AV[:, width - 1].copy(), defl + [Vw])
        locked = np.column_stack(lock_vecs) if lock_vecs else np.empty((N, 0))
        need = want - len(lock_vals)
        width_next = min(V.shape[1], free - locked.shape[1])
        keep_count = max(min(need + (width_next - need) // 2, width_next - 1), 0)
        keep_idx = [j for j in range(width) if j not in best[3]][:keep_count]
        kc = len(keep_idx)
        V[:, :kc] = X[:, keep_idx]
        AV[:, :kc] = AX[:, keep_idx]
        V[:, kc:] = 0.0
        fnorm = np.linalg.norm(f)
        if fnorm <= 1e-12:
            V[:, kc] = _random_unit(rng, N, [Y, locked, V[:, :kc]])
        else:
            f = _orthogonalize(f / fnorm, [locked, V[:, :kc]])
            V[:, kc] = f / np.linalg.norm(f)
        kept = kc

    vals = list(lock_vals)
    vecs = list(lock_vecs)
    resid = list(lock_res)
    conv = [True] * len(vals)
    if len(vals) < want and best is not None:
        theta, X, res, taken = best
        for j in range(X.shape[1]):
            if len(vals) >= want:
                break
            if j in taken:
                continue
            vals.append(theta[j])
            vecs.append(X[:, j].copy())
            resid.append(res[j])
            conv.append(False)
    order = np.argsort(vals, kind="stable")
    return (np.asarray(vals)[order], np.column_stack(vecs)[:, order],
            np.asarray(resid)[order], np.asarray(conv, dtype=bool)[order])


def truncated_eigh(L, r: int, tol: float = 1e-8, max_iter: int | None = None, seed: int = 0,
                   ncv: int | None = None, backend: str | None = None) -> EigenSystem:
    """The ``r`` smallest eigenpairs of a sparse symmetric matrix.

    Parameters
    ----------
    L : sparse matrix or NormalizedLaplacian
    r : number of eigenpairs, ``1 <= r <= N``
    tol : residual threshold ``||L u - lambda u||_2`` for convergence
    max_iter : restart-cycle budget shared by all phases (default ``50 * r``)
    seed : seeds the start and injection vectors; results are deterministic
    ncv : Krylov basis size (default ``max(2r + 1, r + 32)`` capped at N)

    Non-converged pairs are returned with ``converged=False`` and a
    :class:`ConvergenceWarning`.
    """
    A = _as_csr(L)
    N = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    r = int(r)
    if r < 1 or r > N:
        raise ValueError(f"r must satisfy 1 <= r <= {N}, got {r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    max_iter = 50 * r if max_iter is None else int(max_iter)
    ncv = min(N, max(2 * r + 1, r + 32) if ncv is None else int(ncv))
    ncv = max(ncv, min(N, r + 1))
    rng = np.random.default_rng(seed)
    op = kernels.CSROperator(A, backend=backend)
    budget = _Budget(max_iter)

    vals, vecs, res, conv = _thick_restart(op, N, r, np.empty((N, 0)), rng, tol, ncv, budget)

    # deflated search for eigenvalues the Krylov space could not reach
    while conv.all() and vecs.shape[1] < N and budget.left > 0:
        c_val, c_vec, c_res, c_conv = _thick_restart(op, N, 1, vecs, rng, tol, ncv, budget)
        if c_val.size == 0 or not c_conv[0]:
            break
        worst = int(np.argmax(vals))
        if c_val[0] >= vals[worst] - 10 * tol:
            break
        logger.debug("swapping in missed eigenvalue %.3e for %.3e", c_val[0], vals[worst])
        keep = np.arange(vals.shape[0]) != worst
        vals = np.concatenate([vals[keep], c_val])
        vecs = np.column_stack([vecs[:, keep], c_vec])
        res = np.concatenate([res[keep], c_res])
        conv = np.concatenate([conv[keep], c_conv])

    U = sign_normalize(vecs)
    LU = op.matmat(U)
    lam = np.einsum("ij,ij->j", U, LU)
    resid = np.linalg.norm(LU - U * lam, axis=0)
    order = np.lexsort((np.arange(lam.shape[0]), lam))
    lam, U, resid = lam[order], U[:, order], resid[order]
    converged = resid <= tol
    if not converged.all():
        warnings.warn(
            f"{int((~converged).sum())} of {r} eigenpairs did not reach tol={tol:g} within "
            f"{max_iter} restart cycles",
            ConvergenceWarning,
            stacklevel=2,
        )
    return EigenSystem(lam, np.ascontiguousarray(U), resid, converged, budget.used)


def dense_eigh_oracle(L, max_size: int = DENSE_ORACLE_LIMIT) -> EigenSystem:
    """Full spectrum by a dense symmetric solver. Test and diagnostic use only."""
    M = L.matrix if hasattr(L, "matrix") else L
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)
    N = M.shape[0]
    if N > max_size:
        raise ValueError(f"dense oracle limited to N <= {max_size}, got {N}")
    M = 0.5 * (M + M.T)
    lam, U = np.linalg.eigh(M)
    U = sign_normalize(U)
    resid = np.linalg.norm(M @ U - U * lam, axis=0)
    return EigenSystem(lam, U, resid, np.ones(N, dtype=bool), 0)


@dataclass(frozen=True)
class EnergyProfile:
    coefficients: np.ndarray
    band_energy: dict


def spectral_energy_profile(E: EigenSystem, signal, bands=(0.3, 0.8)) -> EnergyProfile:
    """Spectral coefficients |u_i^T f| and their squared mass per eigenvalue band.

    Bands are ``lambda < bands[0]``, ``bands[0] <= lambda < bands[1]`` and
    ``lambda >= bands[1]`` in raw eigenvalue units.
    """
    f = np.asarray(signal, dtype=np.float64)
    if f.shape != (E.eigenvectors.shape[0],):
        raise ValueError(f"signal length {f.shape} does not match {E.eigenvectors.shape[0]}")
    alpha = E.eigenvectors.T @ f
    lam = E.eigenvalues
    energy = alpha ** 2
    lo, hi = bands
    band_energy = {
        "low": float(energy[lam < lo].sum()),
        "mid": float(energy[(lam >= lo) & (lam < hi)].sum()),
        "high": float(energy[lam >= hi].sum()),
    }
    return EnergyProfile(np.abs(alpha), band_energy)
