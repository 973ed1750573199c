"""Synthetic instances and graph-derived dissimilarities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .core import DisconnectedRelation, DissimilarityData, Embedding, MPSEError
from .projections import apply, random_stack


@dataclass(frozen=True, eq=False)
class LabeledPoints2D:
    coords: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.coords, dtype=float)
        if X.ndim != 2 or not np.all(np.isfinite(X)):
            raise MPSEError("points must be a finite 2-D array")
        X.setflags(write=False)
        object.__setattr__(self, "coords", X)
        if self.labels is not None:
            lab = np.array(self.labels)
            if len(lab) != len(X):
                raise MPSEError("labels and points differ in length")
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self):
        return len(self.coords)


@dataclass(frozen=True)
class MultiRelationGraph:
    """Tie counts between ``n`` nodes for several relations.

    ``relations`` maps a relation name to a list of ``(i, j, count)`` with
    ``count >= 1``.
    """

    n: int
    relations: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, ties in self.relations.items():
            for i, j, cnt in ties:
                if not (0 <= i < self.n and 0 <= j < self.n and i != j):
                    raise MPSEError(f"relation {name!r}: bad tie ({i}, {j})")
                if not cnt >= 1:
                    raise MPSEError(f"relation {name!r}: tie ({i}, {j}) has count {cnt}")

    @property
    def names(self):
        return list(self.relations)


def _unit_params(n, rng, stratified):
    if stratified:
        return np.arange(n) / n
    return rng.random(n)


def sample_circle(n, rng, stratified=False):
    """``n`` points uniform on the unit circle.

    Points are parameterised by ``t`` in ``[0, 1)``; :func:`sample_square`
    draws the same ``t`` for the same generator state, which is how the two
    shapes are put in correspondence.
    """
    t = _unit_params(n, rng, stratified)
    a = 2 * np.pi * t
    return LabeledPoints2D(np.column_stack([np.cos(a), np.sin(a)]))


def sample_square(n, rng, stratified=False, half_side=1.0):
    """``n`` points uniform on the boundary of ``[-h, h]^2``.

    The perimeter is walked counter-clockwise from the corner ``(h, -h)``.
    """
    t = _unit_params(n, rng, stratified)
    s = 4.0 * t
    side = np.minimum(np.floor(s).astype(int), 3)
    u = (s - side) * 2 - 1  # position along the side, in [-1, 1)
    h = half_side
    xs = np.choose(side, [np.ones_like(u), -u, -np.ones_like(u), u]) * h
    ys = np.choose(side, [u, np.ones_like(u), -u, -np.ones_like(u)]) * h
    return LabeledPoints2D(np.column_stack([xs, ys]))


def sample_clusters(n, separation, rng):
    """Two unit-variance Gaussian blobs ``separation`` apart, labelled 0 and 1."""
    if n % 2:
        raise ValueError(f"n must be even, got {n}")
    if separation < 0:
        raise ValueError("separation must be nonnegative")
    half = n // 2
    X = rng.standard_normal((n, 2))
    X[:half, 0] -= separation / 2
    X[half:, 0] += separation / 2
    labels = np.repeat([0, 1], half)
    return LabeledPoints2D(X, labels)


def sample_ball3d(n, rng, radius=1.0):
    """``n`` points uniform in the solid 3-ball."""
    g = rng.standard_normal((n, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * np.cbrt(rng.random(n))
    return Embedding(g * r[:, None])


def distances_from_points(points):
    """Complete Euclidean dissimilarities between the rows of ``points``."""
    if isinstance(points, (LabeledPoints2D, Embedding)):
        points = points.coords
    X = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(X)):
        raise MPSEError("points must be finite")
    n = len(X)
    rows, cols = np.triu_indices(n, k=1)
    d = np.linalg.norm(X[rows] - X[cols], axis=1)
    return DissimilarityData(n, rows, cols, d, np.ones(len(d)))


def graph_dissimilarity(g, relation):
    """Shortest-path dissimilarities for one relation of a tie-count graph.

    Each tie of count ``m`` has length ``1/m``; the complete dissimilarity
    is the shortest path length and each pair is weighted by ``1/D_ij``.
    """
    name = g.names[relation] if isinstance(relation, int) else relation
    ties = g.relations[name]
    n = g.n
    best = {}
    for i, j, cnt in ties:
        key = (min(i, j), max(i, j))
        best[key] = min(best.get(key, np.inf), 1.0 / cnt)
    ri = [i for i, _ in best]
    rj = [j for _, j in best]
    A = coo_matrix((list(best.values()), (ri, rj)), shape=(n, n)).tocsr()
    ncomp, _ = connected_components(A, directed=False)
    if ncomp != 1:
        raise DisconnectedRelation(f"relation {name!r} has {ncomp} connected components")
    S = shortest_path(A, method="D", directed=False)
    rows, cols = np.triu_indices(n, k=1)
    d = S[rows, cols]
    return DissimilarityData(n, rows, cols, d, 1.0 / d)


def scalability_instance(n, K, rng, q=2):
    """Ball points, ``K`` random projections and the projected distances.

    Returns ``(ground_truth, projections, dissimilarities)``; the ground
    truth has zero stress by construction.
    """
    if n < 2 or K < 1:
        raise ValueError("need n >= 2 and K >= 1")
    X = sample_ball3d(n, rng)
    P = random_stack(K, q, 3, rng)
    D = [distances_from_points(Y) for Y in apply(P, X)]
    return X, P, D


def circle_square_instance(n, rng, stratified=False):
    """Corresponding circle and square point sets and their distances."""
    t_rng_state = rng.bit_generator.state
    circle = sample_circle(n, rng, stratified)
    rng.bit_generator.state = t_rng_state
    square = sample_square(n, rng, stratified)
    return (circle, square), [distances_from_points(circle), distances_from_points(square)]


def clusters_instance(n, K, separation, rng):
    """``K`` independent two-cluster labelings of the same ``n`` objects.

    Each perspective assigns objects to blob points through its own random
    permutation, so cluster membership differs between perspectives.
    """
    sets = []
    for _ in range(K):
        pts = sample_clusters(n, separation, rng)
        perm = rng.permutation(n)
        sets.append(LabeledPoints2D(pts.coords[perm], pts.labels[perm]))
    return sets, [distances_from_points(s) for s in sets]


__all__ = [
    "LabeledPoints2D",
    "MultiRelationGraph",
    "circle_square_instance",
    "clusters_instance",
    "distances_from_points",
    "graph_dissimilarity",
    "sample_ball3d",
    "sample_circle",
    "sample_clusters",
    "sample_square",
    "scalability_instance",
]
