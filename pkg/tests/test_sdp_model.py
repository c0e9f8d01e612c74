import numpy as np
import pytest

from splrsdp.graph_core import Graph
from splrsdp.sdp_model import (
    Constraint,
    FactoredSolution,
    SparseSymMatrix,
    SplrSdp,
    Term,
    detect_splr,
    eval_constraint,
    eval_objective,
    eval_term,
    is_feasible,
    validate_problem,
)

from conftest import random_graph


def laplacian(g):
    L = np.zeros((g.n, g.n))
    for i, j in g.edges:
        L[i - 1, i - 1] += 1
        L[j - 1, j - 1] += 1
        L[i - 1, j - 1] -= 1
        L[j - 1, i - 1] -= 1
    return L


def test_sparse_sym_matrix_roundtrip_and_inner():
    rng = np.random.default_rng(0)
    A = SparseSymMatrix.from_entries(4, [(1, 2, 0.5), (2, 1, 0.5), (3, 3, -2.0)])
    assert A.entries == {(1, 2): 1.0, (3, 3): -2.0}
    D = A.to_dense()
    assert D[0, 1] == 1.0 and D[1, 0] == 1.0 and D[2, 2] == -2.0
    X = rng.standard_normal((4, 4))
    X = X + X.T
    assert np.isclose(A.inner_dense(X), np.sum(D * X))
    R = rng.standard_normal((4, 2))
    assert np.isclose(A.inner_rows(R), np.sum(D * (R @ R.T)))
    with pytest.raises(ValueError):
        SparseSymMatrix.from_entries(2, [(1, 3, 1.0)])


def test_from_dense_symmetrizes():
    M = np.array([[1.0, 2.0], [0.0, 3.0]])
    A = SparseSymMatrix.from_dense(M)
    assert A.entries == {(1, 1): 1.0, (1, 2): 1.0, (2, 2): 3.0}


def make_toy_problem():
    # n = 3 path pattern, ell = 1, factor = all-ones column
    g = Graph.from_edges(3, [(1, 2), (2, 3)])
    a = np.ones((3, 1))
    obj = Term(SparseSymMatrix.from_entries(3, [(1, 2, 1.0)]), np.zeros((1, 1)))
    cons = [
        Constraint(SparseSymMatrix.from_entries(3, [(i, i, 1.0)]),
                   np.zeros((1, 1)), 1.0, 1.0)
        for i in (1, 2, 3)
    ]
    cons.append(Constraint(SparseSymMatrix(3, {}), np.array([[1.0]]), 0.0, 0.0))
    return SplrSdp(n=3, ell=1, pattern=g, factor=a, objective=obj, constraints=cons)


def test_validate_problem_catches_mistakes():
    p = make_toy_problem()
    validate_problem(p)
    bad = SplrSdp(n=3, ell=1, pattern=p.pattern, factor=np.ones((2, 1)),
                  objective=p.objective, constraints=p.constraints)
    with pytest.raises(ValueError):
        validate_problem(bad)
    off = Constraint(SparseSymMatrix.from_entries(3, [(1, 3, 1.0)]),
                     np.zeros((1, 1)), 0.0, 0.0)
    with pytest.raises(ValueError):
        validate_problem(SplrSdp(n=3, ell=1, pattern=p.pattern, factor=p.factor,
                                 objective=p.objective, constraints=[off]))
    flipped = Constraint(SparseSymMatrix(3, {}), np.array([[1.0]]), 2.0, 1.0)
    with pytest.raises(ValueError):
        validate_problem(SplrSdp(n=3, ell=1, pattern=p.pattern, factor=p.factor,
                                 objective=p.objective, constraints=[flipped]))


def test_eval_matches_dense_reconstruction():
    rng = np.random.default_rng(42)
    p = make_toy_problem()
    R = rng.standard_normal((3, 2))
    sol = FactoredSolution(R)
    X = sol.matrix()
    for i in range(1, p.m + 1):
        c = p.constraints[i - 1]
        A = c.term.dense(p.factor)
        assert np.isclose(eval_constraint(p, i, sol), np.sum(A * X), atol=1e-12)
        assert np.isclose(eval_constraint(p, i, X), np.sum(A * X), atol=1e-12)
    A0 = p.objective.dense(p.factor)
    assert np.isclose(eval_objective(p, sol), np.sum(A0 * X))


def test_is_feasible_interval_semantics():
    p = make_toy_problem()
    sol = FactoredSolution(np.eye(3))  # diag = 1, <11^T, I> = 3 != 0
    ok, rep = is_feasible(p, sol)
    assert not ok
    assert np.isclose(rep["max_violation"], 3.0)
    # relax the low-rank row into an interval that contains 3
    p.constraints[-1] = Constraint(SparseSymMatrix(3, {}), np.array([[1.0]]),
                                   float("-inf"), 5.0)
    ok, rep = is_feasible(p, sol)
    assert ok and rep["max_violation"] == 0.0


def test_factored_solution_rank():
    R = np.zeros((4, 3))
    R[:, 0] = [1.0, 0, 0, 0]
    R[:, 1] = [0, 1e-12, 0, 0]
    sol = FactoredSolution(R)
    assert sol.rank == 3
    assert sol.numerical_rank() == 1


def test_detect_splr_min_bisection_shape():
    # sparse Laplacian objective, diagonal rows, plus the dense all-ones row
    rng = np.random.default_rng(3)
    g = random_graph(rng, 8, 0.3)
    n = g.n
    L = laplacian(g)
    mats = [L]
    bounds = []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        mats.append(E)
        bounds.append((1.0, 1.0))
    mats.append(np.ones((n, n)))
    bounds.append((0.0, 0.0))
    p = detect_splr(mats, bounds, g)
    assert p.ell == 1
    assert np.allclose(np.abs(p.factor[:, 0]), 1.0 / np.sqrt(n))
    assert np.isclose(abs(p.constraints[-1].core[0, 0]), float(n))
    # every matrix reconstructs
    for M, t in zip(mats, [p.objective] + [c.term for c in p.constraints]):
        assert np.abs(t.dense(p.factor) - M).max() < 1e-9
    # all-sparse input gives ell = 0
    q = detect_splr(mats[:-1], bounds[:-1], g)
    assert q.ell == 0 and q.factor.shape == (n, 0)


def test_detect_splr_is_idempotent():
    rng = np.random.default_rng(9)
    g = random_graph(rng, 7, 0.25)
    n = g.n
    F = rng.standard_normal((n, 2))
    mats = [laplacian(g), F @ np.diag([1.0, -2.0]) @ F.T, F @ F.T]
    bounds = [(0.0, 1.0), (2.0, 2.0)]
    p = detect_splr(mats, bounds, g)
    assert p.ell == 2
    recon = [t.dense(p.factor) for t in [p.objective] + [c.term for c in p.constraints]]
    for M, Mre in zip(mats, recon):
        assert np.abs(M - Mre).max() < 1e-8
    p2 = detect_splr(recon, bounds, g)
    assert p2.ell <= p.ell


def test_detect_splr_absorbs_off_pattern_and_rejects_asymmetry():
    g = Graph.from_edges(4, [(1, 2)])
    M = np.zeros((4, 4))
    M[2, 3] = M[3, 2] = 1.0  # off pattern -> its own rank-2 span absorbs it
    ok = detect_splr([np.eye(4), M], [(0.0, 0.0)], g)
    assert ok.ell == 2
    assert np.abs(ok.constraints[0].term.dense(ok.factor) - M).max() < 1e-10
    bad = np.zeros((4, 4))
    bad[0, 2] = 1.0
    with pytest.raises(ValueError):
        detect_splr([np.eye(4), bad], [(0.0, 0.0)], g)
