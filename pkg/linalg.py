"""Sparse Laplacian aggregation and the bottom-of-spectrum eigensolver.

Aggregated Laplacians have their spectrum inside [0, 2], so the ``t``
smallest eigenpairs of ``M`` are the ``t`` largest of ``2I - M``.  Those are
found with a restarted block Lanczos iteration with full
reorthogonalization: the block size exceeds ``t``, which resolves repeated
eigenvalues (disconnected graphs produce them on purpose), and directions
that collapse during orthogonalization are dropped from the basis.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from config import Config
from exceptions import DimensionMismatch, InvalidParameter, NoConvergence

logger = logging.getLogger(__name__)

_OVERSAMPLE = 4
_BLOCKS_PER_RESTART = 8
_DROP_TOL = 1e-10


@dataclass(frozen=True)
class SpectrumSlice:
    """The ``t`` smallest eigenvalues (ascending) with their residual norms."""

    eigenvalues: np.ndarray
    residuals: np.ndarray
    matvecs: int = 0

    @property
    def t(self) -> int:
        return len(self.eigenvalues)


def is_symmetric(m: sp.spmatrix) -> bool:
    return (m != m.T).nnz == 0


def aggregate(laplacians: Sequence, w: Sequence[float]) -> sp.csr_matrix:
    """Sum of ``w_i * L_i`` over the union pattern; zero products stay stored."""
    matrices = [getattr(lap, "matrix", lap) for lap in laplacians]
    if len(matrices) != len(w):
        raise DimensionMismatch(f"{len(matrices)} Laplacians but {len(w)} weights")
    if not matrices:
        raise DimensionMismatch("cannot aggregate zero Laplacians")
    shape = matrices[0].shape
    for i, m in enumerate(matrices):
        if m.shape != shape:
            raise DimensionMismatch(f"Laplacian {i} has shape {m.shape}, expected {shape}")

    rows, cols, vals = [], [], []
    for weight, m in zip(w, matrices):
        coo = m.tocoo()
        rows.append(coo.row)
        cols.append(coo.col)
        vals.append(float(weight) * coo.data)
    out = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=shape).tocsr()
    out.sort_indices()
    return out


def _max_matvecs(n: int) -> int:
    return max(Config.EIG_MATVECS_PER_NODE * n, Config.EIG_MIN_MATVECS)


def _orthonormalize(block: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Two passes of block Gram-Schmidt against ``basis``, then a rank-revealing QR."""
    for _ in range(2):
        if basis.shape[1]:
            block = block - basis @ (basis.T @ block)
    if block.shape[1] == 0:
        return block
    q, r, _ = scipy.linalg.qr(block, mode="economic", pivoting=True)
    keep = np.abs(np.diag(r)) > _DROP_TOL
    q = q[:, keep]
    if basis.shape[1] and q.shape[1]:
        q = q - basis @ (basis.T @ q)
        q, _ = np.linalg.qr(q)
    return q


def _top_eigenpairs(m: sp.spmatrix, t: int, tol: float, seed: int):
    """Largest ``t`` eigenpairs of ``2I - m``; returns (mu desc, vectors, residuals, matvecs)."""
    n = m.shape[0]
    shifted = (2.0 * sp.identity(n, format="csr") - m).tocsr()
    block = min(n, t + _OVERSAMPLE)
    max_basis = min(n, max(block * _BLOCKS_PER_RESTART, 2 * block + 20))
    cap = _max_matvecs(n)

    rng = np.random.default_rng(seed)
    x, _ = np.linalg.qr(rng.standard_normal((n, block)))
    ax = shifted @ x
    matvecs = x.shape[1]
    worst = np.inf

    while True:
        basis, images = [x], [ax]
        width = x.shape[1]
        exhausted = False
        while width < max_basis:
            q = _orthonormalize(images[-1], np.hstack(basis))
            if q.shape[1] == 0:
                exhausted = True
                break
            q = q[:, :max_basis - width]
            basis.append(q)
            images.append(shifted @ q)
            matvecs += q.shape[1]
            width += q.shape[1]
        v = np.hstack(basis)
        av = np.hstack(images)
        h = v.T @ av
        h = 0.5 * (h + h.T)
        theta, c = np.linalg.eigh(h)
        order = np.argsort(-theta, kind="stable")
        theta, c = theta[order], c[:, order]

        y = v @ c[:, :t]
        ay = av @ c[:, :t]
        residuals = np.linalg.norm(ay - y * theta[:t], axis=0)
        worst = float(residuals.max())
        if worst <= tol or exhausted or width >= n:
            return theta[:t], y, residuals, matvecs
        if matvecs >= cap:
            raise NoConvergence(matvecs, worst)

        keep = min(block, c.shape[1])
        x = v @ c[:, :keep]
        ax = av @ c[:, :keep]
        x, r = np.linalg.qr(x)
        ax = scipy.linalg.solve_triangular(r, ax.T, trans="T").T


def _solve(m: sp.spmatrix, t: int, tol: float, seed: int):
    n = m.shape[0]
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {m.shape}")
    if not 1 <= t <= n:
        raise InvalidParameter(f"requested {t} eigenvalues of a {n}x{n} matrix")
    mu, vectors, residuals, matvecs = _top_eigenpairs(sp.csr_matrix(m), t, tol, seed)
    eigenvalues = 2.0 - mu
    eigenvalues[np.abs(eigenvalues) <= Config.EIG_CLAMP] = 0.0
    logger.debug("Eigensolver: n=%d t=%d matvecs=%d worst residual=%.2e",
                 n, t, matvecs, float(residuals.max()))
    return SpectrumSlice(eigenvalues, residuals, matvecs), vectors


def smallest_eigenvalues(m: sp.spmatrix, t: int, tol: float = None, seed: int = None) -> SpectrumSlice:
    """The ``t`` algebraically smallest eigenvalues of an aggregated Laplacian."""
    tol = Config.EIG_TOL if tol is None else tol
    seed = Config.SEED if seed is None else seed
    spectrum, _ = _solve(m, t, tol, seed)
    return spectrum


def smallest_eigenvectors(m: sp.spmatrix, t: int, tol: float = None,
                          seed: int = None) -> Tuple[SpectrumSlice, np.ndarray]:
    """Like ``smallest_eigenvalues`` plus an ``n x t`` orthonormal eigenvector matrix.

    Each column's largest-magnitude entry is made positive.
    """
    tol = Config.EIG_TOL if tol is None else tol
    seed = Config.SEED if seed is None else seed
    spectrum, vectors = _solve(m, t, tol, seed)
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return spectrum, vectors * signs
