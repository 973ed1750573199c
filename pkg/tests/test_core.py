import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpse.core import (
    AsymmetricInput,
    DissimilarityData,
    DuplicatePair,
    Embedding,
    IndexOutOfRange,
    NegativeDistance,
    NonzeroDiagonal,
    NotOrthogonal,
    OptimizerConfig,
    ProjectionStack,
    RunResult,
    StressReport,
    TraceRecord,
    complete_from_matrix,
    validate_dissimilarity,
)
from mpse.projections import random_stack


def test_minimal_instance_is_valid():
    data = DissimilarityData.from_edges(2, [(0, 1, 5.0, 1.0)])
    assert validate_dissimilarity(data) is data
    assert data.n_edges == 1 and data.is_complete


@pytest.mark.parametrize(
    "edges, exc",
    [
        ([(0, 1, -1.0, 1.0)], NegativeDistance),
        ([(0, 1, 1.0, 1.0), (0, 1, 2.0, 1.0)], DuplicatePair),
        ([(0, 1, 1.0, 1.0), (1, 0, 2.0, 1.0)], DuplicatePair),
        ([(0, 2, 1.0, 1.0)], IndexOutOfRange),
        ([(0, 0, 1.0, 1.0)], IndexOutOfRange),
    ],
)
def test_invalid_edges_rejected(edges, exc):
    with pytest.raises(exc):
        DissimilarityData.from_edges(2, edges)


def test_error_names_the_pair():
    with pytest.raises(DuplicatePair, match=r"\(0, 1\)"):
        DissimilarityData.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 0, 2.0)])


@pytest.mark.parametrize("bad", [np.nan, np.inf])
def test_nonfinite_distance_rejected(bad):
    with pytest.raises(ValueError):
        DissimilarityData.from_edges(2, [(0, 1, bad)])


def test_nonpositive_weight_rejected():
    with pytest.raises(ValueError):
        DissimilarityData.from_edges(2, [(0, 1, 1.0, 0.0)])


def test_default_weight_and_orientation():
    data = DissimilarityData.from_edges(3, [(2, 0, 4.0)])
    assert (int(data.rows[0]), int(data.cols[0])) == (0, 2)
    assert data.weight[0] == 1.0


def test_arrays_are_read_only():
    data = DissimilarityData.from_edges(2, [(0, 1, 1.0)])
    with pytest.raises(ValueError):
        data.dist[0] = 3.0


def test_complete_from_matrix_examples():
    data = complete_from_matrix(np.array([[0.0, 5.0], [5.0, 0.0]]))
    assert data.edges == [(0, 1, 5.0, 1.0)]
    with pytest.raises(AsymmetricInput):
        complete_from_matrix(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(NonzeroDiagonal):
        complete_from_matrix(np.array([[1.0, 1.0], [1.0, 0.0]]))
    ones = complete_from_matrix(1.0 - np.eye(3))
    assert ones.n_edges == 3 and np.all(ones.dist == 1.0) and np.all(ones.weight == 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_complete_from_matrix_counts_pairs(n, seed):
    A = np.random.default_rng(seed).random((n, n))
    M = A + A.T
    np.fill_diagonal(M, 0.0)
    data = complete_from_matrix(M)
    assert data.n_edges == n * (n - 1) // 2
    assert data.is_complete
    np.testing.assert_array_equal(data.to_matrix(fill=0.0), M)


def test_dissimilarity_round_trip():
    data = DissimilarityData.from_edges(4, [(0, 1, 1.5, 2.0), (1, 3, 0.0, 1.0), (0, 2, 3.25, 0.5)])
    assert DissimilarityData.from_dict(data.to_dict()) == data


def test_embedding_round_trip_and_validation():
    X = Embedding(np.arange(12.0).reshape(4, 3))
    assert Embedding.from_dict(X.to_dict()) == X
    assert (X.n, X.p) == (4, 3)
    with pytest.raises(ValueError):
        Embedding(np.array([[0.0, np.nan]]))


def test_projection_stack_orthogonality():
    P = random_stack(3, 2, 3, np.random.default_rng(0))
    assert ProjectionStack.from_list(P.to_list()) == P
    assert (P.K, P.q, P.p) == (3, 2, 3)
    bad = P.matrices.copy()
    bad[1] *= 1.0 + 1e-6
    with pytest.raises(NotOrthogonal):
        ProjectionStack(bad)
    # a perturbation below the tolerance is accepted
    ok = P.matrices.copy()
    ok[0, 0, 0] += 1e-12
    ProjectionStack(ok)


def test_stress_report_round_trip():
    rep = StressReport(0.25, (0.1, 0.4), 3.5)
    assert StressReport.from_dict(rep.to_dict()) == rep
    assert rep.sqrt_total == 0.5


@pytest.mark.parametrize(
    "kwargs",
    [{"T": -1}, {"T": 1.5}, {"mu0": 0.0}, {"c": 0.0}, {"c": 1.5}, {"mode": "both"},
     {"init": "pca"}],
)
def test_optimizer_config_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerConfig(**kwargs)


def test_optimizer_config_round_trip():
    cfg = OptimizerConfig(T=7, c=0.3, seed=4, mode="varying", init="smart", grad_tol=1e-6)
    assert OptimizerConfig.from_dict(cfg.to_dict()) == cfg


def test_run_result_round_trip():
    rng = np.random.default_rng(1)
    res = RunResult(
        Embedding(rng.random((5, 3))),
        random_stack(2, 2, 3, rng),
        StressReport(0.5, (0.25, 0.75), 2.0),
        (TraceRecord(0, 0.9, 0.1, 1.0, 0.0, 0.0), TraceRecord(1, 0.5, 0.05, 2.0, 0.0, 0.1)),
        1,
    )
    obj = res.to_dict()
    assert {"n", "p", "q", "coords", "projections", "stress", "trace"} <= set(obj)
    back = RunResult.from_dict(obj)
    assert back.embedding == res.embedding and back.projections == res.projections
    assert back.report == res.report and back.trace == res.trace
    assert back.iterations_used == 1
