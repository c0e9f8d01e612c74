import numpy as np
import pytest

from splrsdp.chordal_conversion import convert_problem
from splrsdp.completion_rank import (AffineSlice, PartialMatrix, bp_bound,
                                     max_rank_for_constraints,
                                     psd_complete_min_rank, rank_reduce_affine,
                                     recover_low_rank, reduce_block)
from splrsdp.graph_core import Graph, TreeDecomposition, chordal_complete, clique_tree
from splrsdp.sdp_model import FactoredSolution, eval_constraint, eval_objective
from splrsdp.sparse_extension import extend_solution

from conftest import random_graph, random_splr_problem


def test_rank_bounds_table():
    assert [max_rank_for_constraints(q) for q in (0, 1, 2, 3, 6, 10, 15)] == \
        [0, 1, 1, 2, 3, 4, 5]
    # r(r+1)/2 <= q tight on both sides
    for q in range(0, 60):
        r = max_rank_for_constraints(q)
        assert r * (r + 1) // 2 <= q < (r + 1) * (r + 2) // 2
    assert [bp_bound(l) for l in (0, 1, 2, 3, 4)] == [0, 2, 3, 5, 7]
    for l in range(1, 12):
        assert l + 1 <= bp_bound(l) <= 2 * l
        assert bp_bound(l) == max_rank_for_constraints(3 * l * (l + 1) // 2)


def _erase_to_clique_tree(X, ct):
    ent = {}
    for t in ct.nodes:
        for a in sorted(ct.bags[t]):
            for b in sorted(ct.bags[t]):
                if a <= b:
                    ent[(a, b)] = X[a - 1, b - 1]
    for i in range(X.shape[0]):
        ent.setdefault((i + 1, i + 1), X[i, i])
    return PartialMatrix(X.shape[0], ent)


def test_psd_complete_erased_low_rank():
    rng = np.random.default_rng(5)
    for _ in range(50):
        n = int(rng.integers(5, 30))
        g = random_graph(rng, n, 0.2)
        fg, _ = chordal_complete(g)
        ct = clique_tree(fg)
        r = int(rng.integers(1, 5))
        F = rng.standard_normal((n, r))
        X = F @ F.T
        pm = _erase_to_clique_tree(X, ct)
        sol = psd_complete_min_rank(pm, ct)
        Xc = sol.matrix()
        err = max(abs(Xc[i - 1, j - 1] - v) for (i, j), v in pm.entries.items())
        assert err < 1e-9
        assert np.linalg.eigvalsh(Xc)[0] > -1e-9
        maxbag = max(len(b) for b in ct.bags.values())
        assert sol.rank == min(r, maxbag)


def test_psd_complete_missing_entry_raises():
    td = TreeDecomposition(nodes=(1, 2), edges=frozenset({(1, 2)}),
                           bags={1: frozenset({1, 2}), 2: frozenset({2, 3})},
                           root=1)
    pm = PartialMatrix(3, {(1, 1): 1.0, (2, 2): 1.0, (3, 3): 1.0, (1, 2): 0.5})
    with pytest.raises(ValueError):
        psd_complete_min_rank(pm, td)


def test_psd_complete_indefinite_bag_raises():
    td = TreeDecomposition(nodes=(1,), edges=frozenset(),
                           bags={1: frozenset({1, 2})}, root=1)
    pm = PartialMatrix(2, {(1, 1): 1.0, (2, 2): 1.0, (1, 2): 2.0})
    with pytest.raises(ValueError):
        psd_complete_min_rank(pm, td)


def test_rank_reduce_affine_reaches_feasibility_bound():
    rng = np.random.default_rng(17)
    for _ in range(30):
        d = int(rng.integers(4, 12))
        q = int(rng.integers(1, 7))
        mats = [0.5 * (M + M.T) for M in rng.standard_normal((q, d, d))]
        R0 = rng.standard_normal((d, d))
        Y0 = R0 @ R0.T
        rhs = [float(np.sum(B * Y0)) for B in mats]
        out = rank_reduce_affine(AffineSlice(mats, rhs, Y0))
        r = out.factor.shape[1]
        assert r <= max_rank_for_constraints(q)
        Y = out.matrix()
        drift = max(abs(float(np.sum(B * Y)) - c) for B, c in zip(mats, rhs))
        assert drift < 1e-7 * max(1.0, np.abs(Y0).max())
        assert np.linalg.eigvalsh(Y)[0] > -1e-8 * max(1.0, np.abs(Y).max())


def test_rank_reduce_affine_edge_cases():
    # no constraints: everything collapses to zero
    Y = np.eye(4) * 2.0
    out = rank_reduce_affine(AffineSlice([], [], Y))
    assert out.factor.shape[1] == 0
    # infeasible start is refused
    B = np.eye(3)
    with pytest.raises(ValueError):
        rank_reduce_affine(AffineSlice([B], [0.0], np.eye(3)))


def test_unique_coupled_slice_is_fixed_point():
    # diag blocks pinned to I and the coupled sum pinned leaves exactly one
    # element; the walk must return it unchanged at rank ell + 1
    for ell in (1, 2, 3):
        D = np.diag([1.0] * (ell - 1) + [0.5])
        Y0 = np.block([[np.eye(ell), D], [D, np.eye(ell)]])
        mats, rhs = [], []
        for off in (0, ell):
            for a in range(ell):
                for b in range(a, ell):
                    E = np.zeros((2 * ell, 2 * ell))
                    E[off + a, off + b] = 1.0
                    E[off + b, off + a] = 1.0
                    mats.append(E)
                    rhs.append(1.0 if a == b else 0.0)
        M = np.diag([4.0] * (ell - 1) + [3.0])
        for a in range(ell):
            for b in range(a, ell):
                u = np.zeros(2 * ell)
                v = np.zeros(2 * ell)
                u[a] = u[ell + a] = 1.0
                v[b] = v[ell + b] = 1.0
                mats.append(0.5 * (np.outer(u, v) + np.outer(v, u)))
                rhs.append(M[a, b])
        out = rank_reduce_affine(AffineSlice(mats, rhs, Y0))
        assert np.abs(out.matrix() - Y0).max() < 1e-8
        assert out.factor.shape[1] == ell + 1


def test_reduce_block_keeps_data_and_certifies_rank():
    rng = np.random.default_rng(3)
    for _ in range(30):
        p = int(rng.integers(1, 7))
        ell = int(rng.integers(1, 4))
        r = int(rng.integers(p + 2 * ell, p + 3 * ell + 3))
        vp = rng.standard_normal((p, ell))
        Rv = rng.standard_normal((p, r))
        R1 = rng.standard_normal((ell, r))
        R2 = rng.standard_normal((ell, r))
        R3 = vp.T @ Rv + R1 + R2
        S = np.vstack([Rv, R1, R2, R3])
        Z = S @ S.T
        Zr = reduce_block(Z, vp, ell)
        assert np.allclose(Zr[:p, :p], Z[:p, :p], atol=1e-8)
        assert np.allclose(Zr[p:, :p], Z[p:, :p], atol=1e-8)
        for gidx in range(3):
            s = slice(p + gidx * ell, p + (gidx + 1) * ell)
            assert np.abs(Zr[s, s] - Z[s, s]).max() < 1e-7
        U = np.vstack([vp, np.eye(ell), np.eye(ell), -np.eye(ell)])
        assert np.abs(U.T @ Zr @ U).max() < 1e-6 * max(1.0, np.abs(Z).max())
        w = np.linalg.eigvalsh(Zr)
        assert w[0] > -1e-8 * max(1.0, w[-1])
        rB = np.linalg.matrix_rank(Z[:p, :p], tol=1e-8)
        assert int(np.sum(w > 1e-8 * w[-1])) <= rB + bp_bound(ell)


def test_reduce_block_narrow_input_untouched():
    rng = np.random.default_rng(9)
    p, ell = 4, 2
    vp = rng.standard_normal((p, ell))
    Rv = rng.standard_normal((p, p))
    R1 = rng.standard_normal((ell, p))
    R2 = rng.standard_normal((ell, p))
    R3 = vp.T @ Rv + R1 + R2
    S = np.vstack([Rv, R1, R2, R3])
    Z = S @ S.T  # residual after removing the bag part has rank 0
    assert np.abs(reduce_block(Z, vp, ell) - Z).max() < 1e-10


def test_reduce_block_rejects_broken_identity():
    rng = np.random.default_rng(1)
    p, ell = 3, 1
    vp = rng.standard_normal((p, ell))
    F = rng.standard_normal((p + 3 * ell, p + 3 * ell))
    with pytest.raises(ValueError):
        reduce_block(F @ F.T, vp, ell)


def _lifted_blocks(ext, bs, F):
    lifted = extend_solution(ext, FactoredSolution(F))
    XL = lifted.factor @ lifted.factor.T
    out = {}
    for t in bs.blocks:
        idx = [v - 1 for v in bs.blocks[t]]
        out[t] = XL[np.ix_(idx, idx)]
    return out


def test_recover_low_rank_tree():
    rng = np.random.default_rng(23)
    for _ in range(10):
        n = int(rng.integers(8, 20))
        ell = int(rng.integers(1, 3))
        p = random_splr_problem(rng, n, ell)
        ext, bs, report = convert_problem(p)
        F = rng.standard_normal((n, 3))
        sol, info = recover_low_rank(_lifted_blocks(ext, bs, F), ext, bs, mode="tree")
        assert info["rank"] <= info["certified_bound"]
        assert max(info["block_ranks"].values()) >= info["completed_rank"]
        ref = FactoredSolution(F)
        for i in range(p.m + 1):
            v0 = eval_constraint(p, i, ref) if i else eval_objective(p, ref)
            v1 = eval_constraint(p, i, sol) if i else eval_objective(p, sol)
            assert abs(v0 - v1) < 1e-7 * max(1.0, abs(v0))


def test_recover_low_rank_path():
    rng = np.random.default_rng(29)
    for _ in range(6):
        n = int(rng.integers(8, 16))
        ell = int(rng.integers(1, 3))
        band = Graph.from_edges(n, {(i, i + 1) for i in range(1, n)})
        p = random_splr_problem(rng, n, ell, graph=band)
        ext, bs, report = convert_problem(p, path_mode=True)
        F = rng.standard_normal((n, 2))
        sol, info = recover_low_rank(_lifted_blocks(ext, bs, F), ext, bs, mode="path")
        wid = report["width_before"]
        assert info["certified_bound"] == wid + ell + 1
        assert info["rank"] <= info["certified_bound"]
        assert info["reduced_blocks"] == []
        ref = FactoredSolution(F)
        for i in range(p.m + 1):
            v0 = eval_constraint(p, i, ref) if i else eval_objective(p, ref)
            v1 = eval_constraint(p, i, sol) if i else eval_objective(p, sol)
            assert abs(v0 - v1) < 1e-7 * max(1.0, abs(v0))


def test_recover_path_mode_rejects_branching():
    rng = np.random.default_rng(31)
    # star-ish pattern forces a branching clique tree eventually; build one
    # directly instead of hunting for it
    p = random_splr_problem(rng, 12, 1)
    ext, bs, _ = convert_problem(p)
    has_branch = any(len(ext.pattern.td.children(t)) == 2 for t in bs.blocks)
    if not has_branch:
        pytest.skip("random instance came out without a branching node")
    F = rng.standard_normal((12, 2))
    with pytest.raises(ValueError):
        recover_low_rank(_lifted_blocks(ext, bs, F), ext, bs, mode="path")
