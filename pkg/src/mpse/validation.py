"""Input checks in the style of ``sklearn.utils.validation``."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .core import CountMismatch, DimensionMismatch, DissimilarityData, complete_from_matrix
from .datasets import distances_from_points


def check_seed(random_state):
    """Turn ``None``, an int, or a Generator into something usable as a seed.

    Returns an int (or None) because the solvers derive several named
    streams from one seed.
    """
    if random_state is None or isinstance(random_state, numbers.Integral):
        return None if random_state is None else int(random_state)
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2**63 - 1))
    if isinstance(random_state, np.random.RandomState):
        return int(random_state.randint(2**31 - 1))
    raise ValueError(f"{random_state!r} cannot be used to seed the solver")


def check_dissimilarities(D, dissimilarity="precomputed"):
    """Coerce a list of relations into :class:`DissimilarityData` objects.

    Each entry may be a ``DissimilarityData``, a dense ``n x n`` matrix
    (``dissimilarity='precomputed'``), or a feature array whose Euclidean
    distances are used (``dissimilarity='euclidean'``).
    """
    if isinstance(D, (DissimilarityData, np.ndarray)) and not (
        isinstance(D, np.ndarray) and D.ndim == 3
    ):
        D = [D]
    out = []
    for k, item in enumerate(D):
        if isinstance(item, DissimilarityData):
            out.append(item)
            continue
        if dissimilarity == "precomputed":
            M = check_array(item, ensure_min_samples=2, ensure_min_features=2)
            out.append(complete_from_matrix(M))
        elif dissimilarity == "euclidean":
            F = check_array(item, ensure_min_samples=2)
            out.append(distances_from_points(F))
        else:
            raise ValueError(f"unknown dissimilarity {dissimilarity!r}")
    if not out:
        raise CountMismatch("at least one relation is required")
    ns = {d.n for d in out}
    if len(ns) != 1:
        raise DimensionMismatch(f"relations cover different object counts: {sorted(ns)}")
    return out


def check_embedding(X, n=None, p=None):
    X = check_array(X, ensure_min_samples=1)
    if n is not None and X.shape[0] != n:
        raise DimensionMismatch(f"expected {n} points, got {X.shape[0]}")
    if p is not None and X.shape[1] != p:
        raise DimensionMismatch(f"expected points in R^{p}, got R^{X.shape[1]}")
    return X
