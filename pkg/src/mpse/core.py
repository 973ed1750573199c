"""Domain types shared across the package.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be passed between threads without copying. Indices are 0-based
everywhere and pairs are stored once, with ``i < j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

ORTHO_TOL = 1e-9


class MPSEError(ValueError):
    """Base class for input and state errors raised by this package."""


class DuplicatePair(MPSEError):
    pass


class NegativeDistance(MPSEError):
    pass


class IndexOutOfRange(MPSEError):
    pass


class AsymmetricInput(MPSEError):
    pass


class NonzeroDiagonal(MPSEError):
    pass


class DimensionMismatch(MPSEError):
    pass


class CountMismatch(MPSEError):
    pass


class ZeroNormalizer(MPSEError):
    pass


class NotAPartition(MPSEError):
    pass


class NotOrthogonal(MPSEError):
    pass


class EmptyIntersection(MPSEError):
    pass


class DisconnectedRelation(MPSEError):
    pass


class DivergenceDetected(RuntimeError):
    """Raised when the optimizer cannot keep its iterates finite.

    The last finite state is available as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DissimilarityData:
    """Weighted sparse dissimilarities for one relation over ``n`` objects.

    Pairs are kept in four parallel arrays. Use :meth:`from_edges` or
    :func:`complete_from_matrix` rather than the raw constructor when the
    input has not already been validated.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray
    dist: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "rows", _frozen(self.rows, np.intp))
        object.__setattr__(self, "cols", _frozen(self.cols, np.intp))
        object.__setattr__(self, "dist", _frozen(self.dist))
        object.__setattr__(self, "weight", _frozen(self.weight))
        validate_dissimilarity(self)

    @classmethod
    def from_edges(cls, n, edges):
        """Build from an iterable of ``(i, j, d)`` or ``(i, j, d, w)`` tuples.

        Pairs given as ``i > j`` are reoriented; ``w`` defaults to 1.
        """
        rows, cols, dist, weight = [], [], [], []
        for e in edges:
            if len(e) == 3:
                i, j, d = e
                w = 1.0
            else:
                i, j, d, w = e
            i, j = int(i), int(j)
            if i > j:
                i, j = j, i
            rows.append(i)
            cols.append(j)
            dist.append(float(d))
            weight.append(float(w))
        return cls(n, rows, cols, dist, weight)

    @property
    def n_edges(self):
        return len(self.rows)

    @property
    def is_complete(self):
        return self.n_edges == self.n * (self.n - 1) // 2

    @property
    def edges(self):
        return [
            (int(i), int(j), float(d), float(w))
            for i, j, d, w in zip(self.rows, self.cols, self.dist, self.weight)
        ]

    def normalizer(self):
        return float(np.dot(self.weight, self.dist**2))

    def subset(self, mask):
        mask = np.asarray(mask)
        return DissimilarityData(
            self.n, self.rows[mask], self.cols[mask], self.dist[mask], self.weight[mask]
        )

    def to_matrix(self, fill=np.nan):
        M = np.full((self.n, self.n), fill, dtype=float)
        np.fill_diagonal(M, 0.0)
        M[self.rows, self.cols] = self.dist
        M[self.cols, self.rows] = self.dist
        return M

    def to_dict(self):
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_dict(cls, obj):
        return cls.from_edges(obj["n"], obj["edges"])

    def __eq__(self, other):
        if not isinstance(other, DissimilarityData):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.dist, other.dist)
            and np.array_equal(self.weight, other.weight)
        )


def validate_dissimilarity(data):
    """Check the pair-storage invariants; return ``data`` or raise.

    Raises
    ------
    IndexOutOfRange, DuplicatePair, NegativeDistance, MPSEError
        Each message names the first offending pair.
    """
    n = data.n
    r, c, d, w = data.rows, data.cols, data.dist, data.weight
    if not (len(r) == len(c) == len(d) == len(w)):
        raise MPSEError("edge arrays have different lengths")
    if n < 0:
        raise MPSEError(f"object count must be nonnegative, got {n}")
    bad = np.flatnonzero((r < 0) | (c >= n) | (r >= c))
    if bad.size:
        k = bad[0]
        raise IndexOutOfRange(
            f"pair ({r[k]}, {c[k]}) violates 0 <= i < j < n with n={n}"
        )
    if len(r):
        key = r.astype(np.int64) * max(n, 1) + c
        order = np.argsort(key, kind="stable")
        dup = np.flatnonzero(np.diff(key[order]) == 0)
        if dup.size:
            k = order[dup[0]]
            raise DuplicatePair(f"pair ({r[k]}, {c[k]}) is stored more than once")
    bad = np.flatnonzero(~np.isfinite(d))
    if bad.size:
        k = bad[0]
        raise MPSEError(f"pair ({r[k]}, {c[k]}) has non-finite distance {d[k]}")
    bad = np.flatnonzero(d < 0)
    if bad.size:
        k = bad[0]
        raise NegativeDistance(f"pair ({r[k]}, {c[k]}) has negative distance {d[k]}")
    bad = np.flatnonzero(~(w > 0) | ~np.isfinite(w))
    if bad.size:
        k = bad[0]
        raise MPSEError(f"pair ({r[k]}, {c[k]}) has non-positive weight {w[k]}")
    return data


def complete_from_matrix(M, weights=None):
    """Convert a dense symmetric dissimilarity matrix into pair storage.

    Every ``i < j`` pair is kept with weight 1 unless a matching ``weights``
    matrix is supplied.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if np.any(np.diag(M) != 0):
        k = int(np.flatnonzero(np.diag(M) != 0)[0])
        raise NonzeroDiagonal(f"diagonal entry ({k}, {k}) is {M[k, k]}")
    if not np.array_equal(M, M.T):
        i, j = map(int, np.argwhere(M != M.T)[0])
        raise AsymmetricInput(f"M[{i},{j}]={M[i, j]} differs from M[{j},{i}]={M[j, i]}")
    n = M.shape[0]
    rows, cols = np.triu_indices(n, k=1)
    w = np.ones(len(rows)) if weights is None else np.asarray(weights, float)[rows, cols]
    return DissimilarityData(n, rows, cols, M[rows, cols], w)


@dataclass(frozen=True, eq=False)
class Embedding:
    """``n`` points in ``R^p``, stored row-wise as an ``n x p`` array."""

    coords: np.ndarray

    def __post_init__(self):
        X = _frozen(self.coords)
        if X.ndim != 2:
            raise DimensionMismatch(f"coords must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise MPSEError("embedding coordinates must be finite")
        object.__setattr__(self, "coords", X)

    @property
    def n(self):
        return self.coords.shape[0]

    @property
    def p(self):
        return self.coords.shape[1]

    def to_dict(self):
        return {"n": self.n, "p": self.p, "coords": self.coords.tolist()}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.asarray(obj["coords"], dtype=float).reshape(obj["n"], obj["p"]))

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return np.array_equal(self.coords, other.coords)


@dataclass(frozen=True, eq=False)
class ProjectionStack:
    """``K`` row-orthonormal ``q x p`` matrices, stored as a ``(K, q, p)`` array."""

    matrices: np.ndarray

    def __post_init__(self):
        Q = _frozen(self.matrices)
        if Q.ndim == 2:
            Q = _frozen(Q[None])
        if Q.ndim != 3:
            raise DimensionMismatch(f"expected shape (K, q, p), got {Q.shape}")
        K, q, p = Q.shape
        if q > p:
            raise DimensionMismatch(f"projection dimension q={q} exceeds p={p}")
        for k in range(K):
            err = np.linalg.norm(Q[k] @ Q[k].T - np.eye(q))
            if not err <= ORTHO_TOL:
                raise NotOrthogonal(f"projection {k} has |QQ^T - I|_F = {err:.3g}")
        object.__setattr__(self, "matrices", Q)

    @property
    def K(self):
        return self.matrices.shape[0]

    @property
    def q(self):
        return self.matrices.shape[1]

    @property
    def p(self):
        return self.matrices.shape[2]

    def __len__(self):
        return self.K

    def __getitem__(self, k):
        return self.matrices[k]

    def to_list(self):
        return self.matrices.tolist()

    @classmethod
    def from_list(cls, obj):
        return cls(np.asarray(obj, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, ProjectionStack):
            return NotImplemented
        return np.array_equal(self.matrices, other.matrices)


@dataclass(frozen=True)
class StressReport:
    """Normalized stress per perspective, their mean, and the raw sum."""

    total: float
    per_perspective: tuple
    raw_total: float

    @property
    def sqrt_total(self):
        return float(np.sqrt(self.total))

    def to_dict(self):
        return {
            "total": self.total,
            "per_perspective": list(self.per_perspective),
            "raw_total": self.raw_total,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            float(obj["total"]),
            tuple(float(v) for v in obj["per_perspective"]),
            float(obj["raw_total"]),
        )


@dataclass(frozen=True)
class OptimizerConfig:
    """Hyperparameters for the fixed- and varying-projection solvers.

    ``mu_fallback`` is the rate used when the adaptive rule is undefined;
    ``None`` keeps the previous rate.
    """

    T: int = 100
    mu0: float = 1.0
    c: float = 1.0
    seed: int | None = 0
    mode: str = "fixed"
    init: str = "random"
    epsilon_dist: float = 1e-9
    grad_tol: float | None = None
    mu0_Q: float | None = None
    mu_fallback: float | None = None
    init_radius: float = 1.0

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 0:
            raise MPSEError(f"T must be a nonnegative integer, got {self.T}")
        if not self.mu0 > 0:
            raise MPSEError(f"mu0 must be positive, got {self.mu0}")
        if not 0 < self.c <= 1:
            raise MPSEError(f"c must lie in (0, 1], got {self.c}")
        if self.mode not in ("fixed", "varying"):
            raise MPSEError(f"mode must be 'fixed' or 'varying', got {self.mode!r}")
        if self.init not in ("random", "smart", "given"):
            raise MPSEError(f"init must be random, smart or given, got {self.init!r}")
        if not self.epsilon_dist >= 0:
            raise MPSEError("epsilon_dist must be nonnegative")
        if not self.init_radius > 0:
            raise MPSEError("init_radius must be positive")

    def to_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, obj):
        return cls(**obj)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    total_stress: float
    grad_norm: float
    lr_X: float
    lr_Q: float
    step_norm: float

    FIELDS = ("iteration", "total_stress", "grad_norm", "lr_X", "lr_Q", "step_norm")

    def as_row(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass(frozen=True, eq=False)
class RunResult:
    embedding: Embedding
    projections: ProjectionStack
    report: StressReport
    trace: tuple = field(default_factory=tuple)
    iterations_used: int = 0

    def to_dict(self):
        return {
            "n": self.embedding.n,
            "p": self.embedding.p,
            "q": self.projections.q,
            "coords": self.embedding.coords.tolist(),
            "projections": self.projections.to_list(),
            "stress": self.report.to_dict(),
            "trace": [r.as_row() for r in self.trace],
            "iterations_used": self.iterations_used,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            embedding=Embedding.from_dict(obj),
            projections=ProjectionStack.from_list(obj["projections"]),
            report=StressReport.from_dict(obj["stress"]),
            trace=tuple(TraceRecord(int(r[0]), *map(float, r[1:])) for r in obj["trace"]),
            iterations_used=int(obj.get("iterations_used", 0)),
        )


def check_same_objects(data: Sequence[DissimilarityData]):
    if len(data) == 0:
        raise CountMismatch("at least one dissimilarity relation is required")
    ns = {d.n for d in data}
    if len(ns) != 1:
        raise DimensionMismatch(f"relations cover different object counts: {sorted(ns)}")
    return data[0].n


def as_coords(X):
    if isinstance(X, Embedding):
        return X.coords
    return np.asarray(X, dtype=float)


def as_matrices(P):
    if isinstance(P, ProjectionStack):
        return P.matrices
    P = np.asarray(P, dtype=float)
    return P[None] if P.ndim == 2 else P

