"""Scikit-learn compatible front end."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import DivergenceDetected, OptimizerConfig, ProjectionStack
from .optimizer import InitConfig, run
from .projections import apply, standard_viewpoints
from .validation import check_dissimilarities, check_embedding, check_seed


class MPSE(BaseEstimator):
    """Multi-perspective simultaneous embedding.

    Fits one embedding in ``R^n_components`` plus one orthogonal projection
    to ``R^projection_dim`` per relation, so that the distances seen through
    projection ``k`` match relation ``k``.

    Parameters
    ----------
    n_components : int, default=3
        Dimension of the embedding.
    projection_dim : int, default=2
        Dimension of each view.
    projections : {'varying', 'standard'} or array of shape (K, q, p)
        ``'varying'`` optimises the projections, ``'standard'`` fixes them to
        evenly spaced views sharing the vertical axis (3-D only), and an
        array fixes them to the given matrices.
    max_iter : int, default=100
    learning_rate : float, default=1.0
        Initial step size; later steps are chosen adaptively.
    sample_prob : float, default=1.0
        Probability with which each pair enters a stochastic gradient.
    init : {'smart', 'random'} or array of shape (n, p), default='smart'
    n_init : int, default=1
        Number of restarts with consecutive seeds; the lowest-stress run wins.
    dissimilarity : {'precomputed', 'euclidean'}, default='precomputed'
        How to read the entries passed to :meth:`fit`.
    tol : float or None, default=None
        Stop early once the RMS gradient falls below this value.
    random_state : int, Generator or None

    Attributes
    ----------
    embedding_ : ndarray of shape (n, p)
    projections_ : ndarray of shape (K, q, p)
    stress_ : float
        Mean normalized stress over the perspectives.
    per_perspective_stress_ : ndarray of shape (K,)
    n_iter_ : int
    trace_ : tuple of TraceRecord
    """

    def __init__(
        self,
        n_components=3,
        projection_dim=2,
        projections="varying",
        max_iter=100,
        learning_rate=1.0,
        sample_prob=1.0,
        init="smart",
        n_init=1,
        dissimilarity="precomputed",
        tol=None,
        random_state=None,
    ):
        self.n_components = n_components
        self.projection_dim = projection_dim
        self.projections = projections
        self.max_iter = max_iter
        self.learning_rate = learning_rate
        self.sample_prob = sample_prob
        self.init = init
        self.n_init = n_init
        self.dissimilarity = dissimilarity
        self.tol = tol
        self.random_state = random_state

    def _fixed_stack(self, K):
        if isinstance(self.projections, str):
            if self.projections == "varying":
                return None
            if self.projections == "standard":
                if (self.n_components, self.projection_dim) != (3, 2):
                    raise ValueError("standard views need n_components=3, projection_dim=2")
                return standard_viewpoints(K)
            raise ValueError(f"unknown projections option {self.projections!r}")
        P = ProjectionStack(np.asarray(self.projections, dtype=float))
        if P.K != K or P.p != self.n_components or P.q != self.projection_dim:
            raise ValueError(
                f"projections have shape {P.matrices.shape}, expected "
                f"({K}, {self.projection_dim}, {self.n_components})"
            )
        return P

    def fit(self, D, y=None):
        """Fit to a list of ``K`` relations over the same objects."""
        D = check_dissimilarities(D, self.dissimilarity)
        n, K = D[0].n, len(D)
        P = self._fixed_stack(K)
        X0 = None
        if isinstance(self.init, str):
            init = self.init
        else:
            X0 = check_embedding(self.init, n, self.n_components)
            init = "given"
        seed = check_seed(self.random_state)
        init_cfg = InitConfig(strategy=init, d1=self.n_components, d2=self.projection_dim)

        best = None
        for r in range(self.n_init):
            cfg = OptimizerConfig(
                T=self.max_iter,
                mu0=self.learning_rate,
                c=self.sample_prob,
                seed=None if seed is None else seed + r,
                mode="varying" if P is None else "fixed",
                init=init,
                grad_tol=self.tol,
            )
            try:
                res = run(D, cfg, P=P, X0=X0, init=init_cfg)
            except DivergenceDetected as exc:
                res = exc.result
            if best is None or res.report.total < best.report.total:
                best = res

        self.embedding_ = np.array(best.embedding.coords)
        self.projections_ = np.array(best.projections.matrices)
        self.stress_ = best.report.total
        self.per_perspective_stress_ = np.array(best.report.per_perspective)
        self.n_iter_ = best.iterations_used
        self.trace_ = best.trace
        return self

    def fit_transform(self, D, y=None):
        """Fit and return the embedding."""
        return self.fit(D).embedding_

    def project(self, X=None):
        """Views of ``X`` (default: the fitted embedding), shape ``(K, n, q)``."""
        check_is_fitted(self, "embedding_")
        X = self.embedding_ if X is None else check_embedding(X, p=self.n_components)
        return apply(self.projections_, X)
