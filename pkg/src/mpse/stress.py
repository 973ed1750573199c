"""Stress objectives and their gradients.

Points are stored row-wise: ``Y`` is ``n x q`` and ``X`` is ``n x p``. A
projection ``Q`` (``q x p``) maps the embedding to ``Y = X @ Q.T``.

Edge sums are accumulated with ``np.bincount`` in stored-edge order, so every
result is bit-reproducible for identical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    CountMismatch,
    DimensionMismatch,
    DissimilarityData,
    NotAPartition,
    StressReport,
    ZeroNormalizer,
    as_coords,
    as_matrices,
    check_same_objects,
)

EPSILON_DIST = 1e-9


@dataclass(frozen=True, eq=False)
class EdgeSample:
    """Edges of ``data`` retained by one Bernoulli(c) draw.

    ``index`` holds sorted positions into the edge arrays of ``data``.
    """

    data: DissimilarityData
    index: np.ndarray
    c: float

    @property
    def n_retained(self):
        return len(self.index)

    @property
    def retained(self):
        return self.data.subset(self.index)


def subsample(data, c, rng):
    """Keep each stored pair independently with probability ``c``.

    The retained count is drawn from Binomial(m, c) and a uniform subset of
    that size is taken, which has the same law as m independent coin flips
    but costs O(c m) instead of O(m).
    """
    if not 0 < c <= 1:
        raise ValueError(f"c must lie in (0, 1], got {c}")
    m = data.n_edges
    if c == 1:
        return EdgeSample(data, np.arange(m), 1.0)
    k = rng.binomial(m, c)
    index = np.sort(rng.choice(m, size=k, replace=False))
    return EdgeSample(data, index, float(c))


def _check_points(Y, data):
    Y = as_coords(Y)
    if Y.ndim != 2 or Y.shape[0] != data.n:
        raise DimensionMismatch(
            f"points have shape {Y.shape}, relation covers n={data.n} objects"
        )
    return Y


def _edges(data, sample):
    if sample is None:
        return data.rows, data.cols, data.dist, data.weight, 1.0
    if sample.data is not data and sample.data != data:
        raise ValueError("sample was drawn from a different relation")
    idx = sample.index
    return data.rows[idx], data.cols[idx], data.dist[idx], data.weight[idx], sample.c


def _pair_gradient(Y, rows, cols, dist, weight, eps):
    """Per-point gradient of sum_w (d - |y_i - y_j|)^2 over the given pairs."""
    n, q = Y.shape
    diff = Y[rows] - Y[cols]
    norm = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    live = norm >= eps
    coef = np.zeros_like(norm)
    coef[live] = 2.0 * weight[live] * (norm[live] - dist[live]) / norm[live]
    f = coef[:, None] * diff
    G = np.empty((n, q))
    for a in range(q):
        G[:, a] = np.bincount(rows, f[:, a], minlength=n) - np.bincount(
            cols, f[:, a], minlength=n
        )
    return G


def mds_stress(Y, data, sample=None):
    """Weighted raw stress ``sum w_ij (d_ij - |y_i - y_j|)^2`` over stored pairs.

    With a sample, the sum runs over retained pairs and is divided by ``c``.
    """
    Y = _check_points(Y, data)
    rows, cols, dist, weight, c = _edges(data, sample)
    diff = Y[rows] - Y[cols]
    norm = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return float(np.dot(weight, (dist - norm) ** 2)) / c


def normalized_mds_stress(Y, data):
    """Raw weighted stress divided by ``sum w_ij d_ij^2``."""
    norm = data.normalizer()
    if norm <= 0:
        raise ZeroNormalizer("all stored dissimilarities are zero")
    return mds_stress(Y, data) / norm


def mds_stress_gradient(Y, data, sample=None, epsilon_dist=EPSILON_DIST):
    """Gradient of :func:`mds_stress` with respect to each point.

    Pairs closer than ``epsilon_dist`` contribute nothing (the stress is not
    differentiable where two points coincide). With a sample, the sum runs
    over retained pairs and is divided by ``c``, giving an unbiased estimate.
    """
    Y = _check_points(Y, data)
    rows, cols, dist, weight, c = _edges(data, sample)
    G = _pair_gradient(Y, rows, cols, dist, weight, epsilon_dist)
    if c != 1.0:
        G /= c
    return G


def _check_stack(X, P, D):
    X = as_coords(X)
    Q = as_matrices(P)
    if len(D) != Q.shape[0]:
        raise CountMismatch(f"{len(D)} relations for {Q.shape[0]} projections")
    n = check_same_objects(D)
    if X.ndim != 2 or X.shape[0] != n:
        raise DimensionMismatch(f"embedding has shape {X.shape}, relations cover n={n}")
    if Q.shape[2] != X.shape[1]:
        raise DimensionMismatch(
            f"projections act on R^{Q.shape[2]}, embedding lives in R^{X.shape[1]}"
        )
    return X, Q


def mpse_stress(X, P, D):
    """Per-perspective normalized stress, their mean, and the raw total."""
    X, Q = _check_stack(X, P, D)
    per, raw = [], 0.0
    for k, data in enumerate(D):
        Y = X @ Q[k].T
        s = mds_stress(Y, data)
        norm = data.normalizer()
        if norm <= 0:
            raise ZeroNormalizer(f"relation {k} has all-zero dissimilarities")
        raw += s
        per.append(s / norm)
    return StressReport(float(np.mean(per)), tuple(per), float(raw))


def _samples_for(D, samples):
    if samples is None:
        return [None] * len(D)
    if len(samples) != len(D):
        raise CountMismatch(f"{len(samples)} samples for {len(D)} relations")
    return samples


def _scales_for(D, scales):
    return np.ones(len(D)) if scales is None else np.asarray(scales, dtype=float)


def perspective_gradients(X, P, D, samples=None, epsilon_dist=EPSILON_DIST):
    """Per-perspective gradients ``dS/dY_k`` evaluated at ``Y_k = X Q_k^T``."""
    X, Q = _check_stack(X, P, D)
    samples = _samples_for(D, samples)
    return [
        mds_stress_gradient(X @ Q[k].T, D[k], samples[k], epsilon_dist)
        for k in range(len(D))
    ]


def embedding_gradient(X, P, D, samples=None, epsilon_dist=EPSILON_DIST, scales=None):
    """Gradient of the multi-perspective stress with respect to the embedding.

    Each perspective's point gradient is pulled back through its projection
    (``G_k @ Q_k``). ``scales`` optionally weights the perspectives, e.g.
    ``1 / (K * normalizer_k)`` for the normalized objective.
    """
    X, Q = _check_stack(X, P, D)
    scales = _scales_for(D, scales)
    grads = perspective_gradients(X, Q, D, samples, epsilon_dist)
    G = np.zeros_like(X)
    for k, Gy in enumerate(grads):
        G += scales[k] * (Gy @ Q[k])
    return G


def projection_gradient(X, P, D, samples=None, epsilon_dist=EPSILON_DIST, scales=None):
    """Gradient with respect to each projection matrix, shape ``(K, q, p)``.

    Block ``k`` is ``G_k^T X`` where ``G_k`` is the ``n x q`` point gradient
    of perspective ``k``.
    """
    X, Q = _check_stack(X, P, D)
    scales = _scales_for(D, scales)
    grads = perspective_gradients(X, Q, D, samples, epsilon_dist)
    return np.stack([scales[k] * (Gy.T @ X) for k, Gy in enumerate(grads)])


@dataclass(frozen=True, eq=False)
class GradientPair:
    """Gradients with respect to the embedding and, optionally, the projections."""

    dX: np.ndarray
    dQ: np.ndarray | None = None


def gradient_pair(X, P, D, samples=None, epsilon_dist=EPSILON_DIST, scales=None,
                  with_X=True, with_Q=True):
    """Both gradients from a single pass over the edges.

    Either block can be skipped; a skipped ``dX`` is returned as ``None``.
    """
    X, Q = _check_stack(X, P, D)
    scales = _scales_for(D, scales)
    grads = perspective_gradients(X, Q, D, samples, epsilon_dist)
    dX = dQ = None
    if with_X:
        dX = np.zeros_like(X)
        for k, Gy in enumerate(grads):
            dX += scales[k] * (Gy @ Q[k])
    if with_Q:
        dQ = np.stack([scales[k] * (Gy.T @ X) for k, Gy in enumerate(grads)])
    return GradientPair(dX, dQ)


def batch_gradient_estimate(Y, data, batches, epsilon_dist=EPSILON_DIST):
    """Approximate point gradient using only pairs inside each point's batch.

    Row ``i`` sums over partners ``j`` in the same batch and is scaled by
    ``n / |b(i)|``. ``batches`` must partition ``range(n)``.
    """
    Y = _check_points(Y, data)
    n = data.n
    batches = [np.asarray(b, dtype=np.intp) for b in batches]
    seen = np.concatenate(batches) if batches else np.empty(0, np.intp)
    if len(seen) != n or not np.array_equal(np.sort(seen), np.arange(n)):
        raise NotAPartition("batches must cover every object exactly once")
    batch_of = np.empty(n, dtype=np.intp)
    size = np.empty(n)
    for b, members in enumerate(batches):
        batch_of[members] = b
        size[members] = len(members)
    same = batch_of[data.rows] == batch_of[data.cols]
    G = _pair_gradient(
        Y, data.rows[same], data.cols[same], data.dist[same], data.weight[same], epsilon_dist
    )
    return G * (n / size)[:, None]
