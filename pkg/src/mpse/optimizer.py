"""Stochastic adaptive gradient descent for the multi-perspective stress.

The solvers minimise the normalized objective, the mean over perspectives of
``stress_k / sum_k(w d^2)``, so that a unit initial learning rate is
meaningful regardless of the scale of the data. Step sizes after the first
come from a secant (Barzilai-Borwein style) rule evaluated on the same edge
sample as the step itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CountMismatch,
    DimensionMismatch,
    DissimilarityData,
    DivergenceDetected,
    EmptyIntersection,
    Embedding,
    OptimizerConfig,
    ProjectionStack,
    RunResult,
    TraceRecord,
    as_coords,
    as_matrices,
    check_same_objects,
)
from .projections import random_orthogonal, random_stack, retract, retract_stack
from .stress import gradient_pair, mds_stress, mpse_stress, subsample

logger = logging.getLogger(__name__)

RATE_DENOM_TOL = 1e-14
GUARD_FACTOR = 1e6
MAX_GUARDS = 20


def adaptive_rate(X_prev, X_curr, g_prev, g_curr, mu_fallback):
    """Secant step ``<dX, dg> / |dg|^2`` with Frobenius inner products.

    Falls back to ``mu_fallback`` when ``|dg|^2`` is below ``1e-14`` or the
    quotient is not a positive finite number.
    """
    dX = np.asarray(X_curr, dtype=float) - np.asarray(X_prev, dtype=float)
    dg = np.asarray(g_curr, dtype=float) - np.asarray(g_prev, dtype=float)
    if dX.shape != dg.shape:
        raise DimensionMismatch(f"step shape {dX.shape} vs gradient shape {dg.shape}")
    den = float(np.vdot(dg, dg))
    if not den >= RATE_DENOM_TOL:
        return mu_fallback
    mu = float(np.vdot(dX, dg)) / den
    if not (mu > 0 and np.isfinite(mu)):
        return mu_fallback
    return mu


@dataclass(frozen=True)
class InitConfig:
    """Settings for building a starting point.

    ``d1`` and ``d2`` enter the combined-dissimilarity scale
    ``d1 / (d2 * K)``; they default to the embedding and projection
    dimensions. ``T`` and ``c`` override the solver values for the two
    initialisation loops when set. ``proj_starts`` random starting stacks
    are tried when fitting the projections.
    """

    strategy: str = "smart"
    radius: float = 1.0
    d1: int = 3
    d2: int = 2
    T: int | None = None
    c: float | None = None
    proj_starts: int = 5

    def __post_init__(self):
        if self.proj_starts < 1:
            raise ValueError("proj_starts must be at least 1")
        if self.strategy not in ("random", "smart", "given"):
            raise ValueError(f"unknown init strategy {self.strategy!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.d1 >= self.d2 >= 1:
            raise ValueError(f"need d1 >= d2 >= 1, got d1={self.d1}, d2={self.d2}")


def random_init(n, p, radius, rng):
    """``n`` points uniform in the ``p``-ball of the given radius."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    g = rng.standard_normal((n, p))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / p)
    return Embedding(g * r[:, None])


def _normalized_scales(D):
    K = len(D)
    return np.array([1.0 / (K * d.normalizer()) for d in D])


def _gradients(X, Q, D, samples, eps, scales, want_X, want_Q):
    g = gradient_pair(X, Q, D, samples, eps, scales, want_X, want_Q)
    return g.dX, g.dQ


def _sampled_stress(X, Q, D, samples):
    per = [
        mds_stress(X @ Q[k].T, d, samples[k]) / d.normalizer() for k, d in enumerate(D)
    ]
    return float(np.mean(per))


def _rms(a):
    return float(np.linalg.norm(a) / np.sqrt(a.size)) if a.size else 0.0


def _descend(D, X, Q, cfg, rng, update_X, update_Q, callback=None, monitor=True):
    """Shared loop for fixed, varying and projections-only descent.

    With ``monitor=False`` the per-iteration stress is the sampled estimate
    rather than the full objective, which skips an O(|E|) pass per step.
    """
    X = np.array(as_coords(X), dtype=float)
    Q = np.array(as_matrices(Q), dtype=float)
    eps = cfg.epsilon_dist
    scales = _normalized_scales(D)
    mu_X = cfg.mu0
    mu_Q = cfg.mu0 if cfg.mu0_Q is None else cfg.mu0_Q

    stress0 = mpse_stress(X, Q, D).total
    gX, gQ = _gradients(X, Q, D, None, eps, scales, update_X, update_Q)
    g0 = gX if update_X else gQ
    trace = [TraceRecord(0, stress0, _rms(g0), mu_X if update_X else 0.0,
                         mu_Q if update_Q else 0.0, 0.0)]
    ceiling = GUARD_FACTOR * max(stress0, 1e-300)
    guards = 0
    used = 0

    def result():
        return RunResult(
            Embedding(X), ProjectionStack(Q), mpse_stress(X, Q, D), tuple(trace), used
        )

    for t in range(1, cfg.T + 1):
        samples = [subsample(d, cfg.c, rng) for d in D]
        gX, gQ = _gradients(X, Q, D, samples, eps, scales, update_X, update_Q)
        g = gX if update_X else gQ
        if cfg.grad_tol is not None and _rms(g) < cfg.grad_tol:
            break
        X_new = X - mu_X * gX if update_X else X
        Q_new = retract_stack(Q - mu_Q * gQ) if update_Q else Q
        if not np.all(np.isfinite(X_new)):
            stress = np.inf
        elif monitor:
            stress = mpse_stress(X_new, Q_new, D).total
        else:
            stress = _sampled_stress(X_new, Q_new, D, samples)
        if not (np.isfinite(stress) and stress <= ceiling):
            guards += 1
            logger.debug("iteration %d: stress %.3g rejected, halving rates", t, stress)
            if guards > MAX_GUARDS:
                raise DivergenceDetected(
                    f"stress diverged for {MAX_GUARDS} consecutive iterations", result()
                )
            mu_X /= 2.0
            mu_Q /= 2.0
            used = t
            trace.append(TraceRecord(t, trace[-1].total_stress, _rms(g),
                                     mu_X if update_X else 0.0,
                                     mu_Q if update_Q else 0.0, 0.0))
            continue
        guards = 0
        # each secant sees only its own block's move; joint differences let the
        # embedding step swamp the projection curvature and collapse mu_Q
        if update_X:
            gX_new, _ = _gradients(X_new, Q, D, samples, eps, scales, True, False)
        if update_Q:
            _, gQ_new = _gradients(X, Q_new, D, samples, eps, scales, False, True)
        if update_X:
            fallback = mu_X if cfg.mu_fallback is None else cfg.mu_fallback
            mu_X = adaptive_rate(X, X_new, gX, gX_new, fallback)
            step = _rms(X_new - X)
        if update_Q:
            fallback = mu_Q if cfg.mu_fallback is None else cfg.mu_fallback
            mu_Q = adaptive_rate(Q, Q_new, gQ, gQ_new, fallback)
            if not update_X:
                step = _rms(Q_new - Q)
        X, Q = X_new, Q_new
        used = t
        trace.append(TraceRecord(t, stress, _rms(g), mu_X if update_X else 0.0,
                                 mu_Q if update_Q else 0.0, step))
        if callback is not None:
            callback(t, X, Q)
    return result()


SOLVER, INIT_X, INIT_Q, INIT_MDS, INIT_PROJ, INIT_ALIGN = range(6)


def _stream(seed, key):
    """Independent generator for one named use of ``seed``."""
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def _check_inputs(D, X0, P):
    D = list(D)
    n = check_same_objects(D)
    X = as_coords(X0)
    Q = as_matrices(P)
    if X.shape[0] != n:
        raise DimensionMismatch(f"initial embedding has {X.shape[0]} points, relations cover {n}")
    if Q.shape[0] != len(D):
        raise CountMismatch(f"{len(D)} relations for {Q.shape[0]} projections")
    if Q.shape[2] != X.shape[1]:
        raise DimensionMismatch(f"projections act on R^{Q.shape[2]}, embedding is in R^{X.shape[1]}")
    return D


def run_fixed(D, P, X0, cfg, callback=None):
    """Minimise over the embedding with the projections held fixed.

    ``callback(t, X, Q)`` is called after every accepted iteration.
    """
    D = _check_inputs(D, X0, P)
    return _descend(D, X0, P, cfg, _stream(cfg.seed, SOLVER), True, False, callback)


def run_varying(D, X0, Q0, cfg, callback=None):
    """Jointly minimise over the embedding and the projections.

    Both gradients are taken at the current ``(X, Q)`` on one edge sample;
    the embedding takes a plain step and each projection takes a step
    followed by retraction onto the orthogonal matrices.
    """
    D = _check_inputs(D, X0, Q0)
    return _descend(D, X0, Q0, cfg, _stream(cfg.seed, SOLVER), True, True, callback)


def optimize_projections(D, X, Q0, cfg, callback=None):
    """Projected gradient descent on the projections with ``X`` frozen."""
    D = _check_inputs(D, X, Q0)
    return _descend(D, X, Q0, cfg, _stream(cfg.seed, SOLVER), False, True, callback)


def combine_dissimilarities(D, d1, d2):
    """Combined relation over pairs present in every relation.

    ``dbar_ij^2 = d1 / (d2 K) * sum_k (D^k_ij)^2``; the weight is the mean of
    the per-relation weights.
    """
    D = list(D)
    n = check_same_objects(D)
    K = len(D)
    keyed = [d.rows.astype(np.int64) * n + d.cols for d in D]
    common = keyed[0]
    for key in keyed[1:]:
        common = np.intersect1d(common, key, assume_unique=True)
    if len(D) == 1:
        common = np.sort(common)
    if common.size == 0:
        raise EmptyIntersection("no pair is present in every relation")
    sq = np.zeros(common.size)
    w = np.zeros(common.size)
    for d, key in zip(D, keyed):
        order = np.argsort(key)
        pos = order[np.searchsorted(key, common, sorter=order)]
        sq += d.dist[pos] ** 2
        w += d.weight[pos]
    dist = np.sqrt(d1 / (d2 * K) * sq)
    return DissimilarityData(n, common // n, common % n, dist, w / K)


def _combined_mds(D, init, cfg):
    n = check_same_objects(D)
    combined = combine_dissimilarities(D, init.d1, init.d2)
    X0 = random_init(n, init.d1, init.radius, _stream(cfg.seed, INIT_X))
    res = _descend([combined], X0, np.eye(init.d1)[None], cfg,
                   _stream(cfg.seed, INIT_MDS), True, False, monitor=False)
    return res.embedding


def smart_initialize(D, init, cfg):
    """Starting embedding and projections for the varying-projection solver.

    An MDS embedding of the combined dissimilarities in ``R^d1`` is computed
    first; projections into ``R^d2`` are then fitted to it with the
    embedding frozen.
    """
    D = list(D)
    sub = replace(
        cfg,
        T=cfg.T if init.T is None else init.T,
        c=cfg.c if init.c is None else init.c,
    )
    X = _combined_mds(D, init, sub)
    q_rng = _stream(cfg.seed, INIT_Q)
    fit_rng = _stream(cfg.seed, INIT_PROJ)
    best_Q, best_s = None, None
    for _ in range(init.proj_starts):
        Q0 = random_stack(len(D), init.d2, init.d1, q_rng)
        fitted = _descend(D, X, Q0, sub, fit_rng, False, True, monitor=False)
        per = np.array(fitted.report.per_perspective)
        Q = fitted.projections.matrices
        if best_Q is None:
            best_Q, best_s = Q.copy(), per
        else:
            # with X frozen the views are fitted independently, so keep the best per view
            better = per < best_s
            best_Q[better] = Q[better]
            best_s = np.where(better, per, best_s)
    return X, ProjectionStack(best_Q)


def align_to_projections(X, fitted, P, n_starts=20, n_rounds=50, rng=None):
    """Rotate ``X`` so its fitted views line up with the given projections.

    ``fitted`` are projections fitted to ``X`` itself, so ``fitted[k]`` is
    close to ``O_k P[k] R`` for some 2-D orthogonal ``O_k`` and one ambient
    orthogonal ``R``. Alternating Procrustes solves for both, from several
    starting ``R``; returns ``(X @ R.T, residual)``.
    """
    X = as_coords(X)
    F = as_matrices(fitted)
    P = as_matrices(P)
    K, q, p = P.shape
    rng = np.random.default_rng(0) if rng is None else rng
    best_R, best_res = np.eye(p), np.inf
    for start in range(n_starts):
        R = np.eye(p) if start == 0 else random_orthogonal(p, p, rng)
        for _ in range(n_rounds):
            O = [retract(F[k] @ (P[k] @ R).T) for k in range(K)]
            B = np.concatenate([O[k] @ P[k] for k in range(K)])
            R = retract(B.T @ F.reshape(K * q, p))
        res = sum(np.linalg.norm(F[k] - O[k] @ P[k] @ R) ** 2 for k in range(K))
        if res < best_res:
            best_R, best_res = R, res
    return Embedding(X @ best_R.T), float(best_res)


def initialize(D, cfg, init=None, P=None, X0=None, Q0=None):
    """Starting ``(X, Q)`` for :func:`run` according to ``cfg.init``.

    With fixed projections a smart start runs the full two-stage
    initialisation and then turns the embedding so that its fitted views
    match the given ones.
    """
    D = list(D)
    n = check_same_objects(D)
    if init is None:
        p = as_matrices(P).shape[2] if P is not None else 3
        q = as_matrices(P).shape[1] if P is not None else 2
        init = InitConfig(strategy=cfg.init, radius=cfg.init_radius, d1=p, d2=q)
    if cfg.init == "given":
        if X0 is None:
            raise ValueError("init='given' requires an initial embedding")
        X = X0 if isinstance(X0, Embedding) else Embedding(X0)
    elif cfg.init == "smart":
        X, Q = smart_initialize(D, init, cfg)
        if cfg.mode == "varying":
            return X, (Q if Q0 is None else _stack(Q0))
        if P is None:
            raise ValueError("fixed mode requires projections")
        X, _ = align_to_projections(X, Q, P, rng=_stream(cfg.seed, INIT_ALIGN))
    else:
        X = random_init(n, init.d1, init.radius, _stream(cfg.seed, INIT_X))
    if cfg.mode == "fixed":
        if P is None:
            raise ValueError("fixed mode requires projections")
        return X, _stack(P)
    if Q0 is not None:
        return X, _stack(Q0)
    return X, random_stack(len(D), init.d2, init.d1, _stream(cfg.seed, INIT_Q))


def _stack(P):
    return P if isinstance(P, ProjectionStack) else ProjectionStack(P)


def run(D, cfg, P=None, X0=None, Q0=None, init=None, callback=None):
    """Initialise according to ``cfg`` and run the matching solver."""
    X, Q = initialize(D, cfg, init=init, P=P, X0=X0, Q0=Q0)
    if cfg.mode == "fixed":
        return run_fixed(D, Q, X, cfg, callback)
    return run_varying(D, X, Q, cfg, callback)
