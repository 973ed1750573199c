"""Orthogonal projections: fixed viewpoints, random draws, SVD retraction."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import DimensionMismatch, ProjectionStack, as_coords, as_matrices

RANK_TOL = 1e-12


class RankDeficientWarning(UserWarning):
    """The nearest orthogonal matrix is not unique; an arbitrary one was chosen."""


@dataclass(frozen=True)
class SmallSVD:
    """Reduced SVD ``A = U diag(S) V^T`` of a ``q x p`` matrix, ``q <= p``.

    ``U`` is ``q x q`` orthogonal, ``V`` is ``p x q`` with orthonormal
    columns, and ``S`` is sorted in descending order.
    """

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    rank_deficient: bool = False

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


def standard_viewpoints(K=3):
    """``K`` views of ``R^3`` sharing the vertical axis.

    The first row of view ``k`` is the horizontal unit vector at azimuth
    ``90 - k * 180 / K`` degrees and the second row is ``(0, 0, 1)``. For
    ``K = 3`` these are the 0, 60 and 120 degree views::

        [[0, 1, 0], [0, 0, 1]]
        [[sqrt(3)/2, 1/2, 0], [0, 0, 1]]
        [[sqrt(3)/2, -1/2, 0], [0, 0, 1]]
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    mats = np.zeros((K, 2, 3))
    for k in range(K):
        theta = np.pi / 2 - k * np.pi / K
        mats[k, 0] = [np.cos(theta), np.sin(theta), 0.0]
        mats[k, 1] = [0.0, 0.0, 1.0]
    # exact zeros keep the K=3 matrices bit-identical to their closed form
    mats[np.abs(mats) < 1e-15] = 0.0
    return ProjectionStack(mats)


def random_orthogonal(q, p, rng):
    """Haar-distributed ``q x p`` matrix with orthonormal rows."""
    if q > p:
        raise DimensionMismatch(f"cannot have {q} orthonormal rows in R^{p}")
    G = rng.standard_normal((p, q))
    Qm, R = np.linalg.qr(G)
    # sign fix makes the QR factor Haar rather than biased by the QR convention
    Qm = Qm * np.where(np.diag(R) < 0, -1.0, 1.0)
    return np.ascontiguousarray(Qm.T)


def random_stack(K, q, p, rng):
    return ProjectionStack(np.stack([random_orthogonal(q, p, rng) for _ in range(K)]))


def _sym_eig(M):
    """Eigenpairs of a small symmetric matrix, eigenvalues descending."""
    q = M.shape[0]
    if q == 1:
        return M[0].copy(), np.ones((1, 1))
    if q == 2:
        a, b, c = M[0, 0], M[0, 1], M[1, 1]
        theta = 0.5 * np.arctan2(2.0 * b, a - c)
        cs, sn = np.cos(theta), np.sin(theta)
        lam1 = a * cs * cs + 2.0 * b * cs * sn + c * sn * sn
        lam2 = a * sn * sn - 2.0 * b * cs * sn + c * cs * cs
        U = np.array([[cs, -sn], [sn, cs]])
        if lam2 > lam1:
            return np.array([lam2, lam1]), U[:, ::-1]
        return np.array([lam1, lam2]), U
    lam, U = np.linalg.eigh(M)
    return lam[::-1], U[:, ::-1]


def _complete_columns(V, live):
    """Replace dead columns of ``V`` with an orthonormal complement of the live ones."""
    p, q = V.shape
    basis = [V[:, k] for k in range(q) if live[k]]
    out = V.copy()
    candidates = iter(np.eye(p))
    for k in range(q):
        if live[k]:
            continue
        for e in candidates:
            v = e - sum(np.dot(e, b) * b for b in basis)
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                v = v / nv
                basis.append(v)
                out[:, k] = v
                break
    return out


def small_svd(A):
    """Reduced SVD of a ``q x p`` matrix via the eigendecomposition of ``A A^T``.

    Singular values below ``1e-12`` are treated as zero and the matching
    right singular vectors are completed to an orthonormal set.
    """
    A = np.asarray(A, dtype=float)
    q, p = A.shape
    if q > p:
        raise DimensionMismatch(f"expected q <= p, got shape {A.shape}")
    lam, U = _sym_eig(A @ A.T)
    S = np.sqrt(np.clip(lam, 0.0, None))
    live = S >= RANK_TOL
    V = np.zeros((p, q))
    V[:, live] = (A.T @ U[:, live]) / S[live]
    deficient = not live.all()
    if deficient:
        V = _complete_columns(V, live)
        S = np.where(live, S, 0.0)
    return SmallSVD(U, S, V, deficient)


def retract(A):
    """Nearest matrix with orthonormal rows to ``A`` in Frobenius norm: ``U V^T``.

    Warns with :class:`RankDeficientWarning` when ``A`` is rank deficient,
    in which case the result is one of several equally near matrices.
    """
    svd = small_svd(A)
    if svd.rank_deficient:
        warnings.warn(
            "retraction of a rank-deficient matrix is not unique", RankDeficientWarning
        )
    return svd.U @ svd.V.T


def retract_stack(Q):
    return np.stack([retract(Qk) for Qk in as_matrices(Q)])


def apply(P, X):
    """Project every point through every view; returns shape ``(K, n, q)``."""
    Q = as_matrices(P)
    X = as_coords(X)
    if X.ndim != 2 or X.shape[1] != Q.shape[2]:
        raise DimensionMismatch(
            f"projections act on R^{Q.shape[2]}, points have shape {X.shape}"
        )
    return np.einsum("kqp,np->knq", Q, X)
