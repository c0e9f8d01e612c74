import numpy as np
import pytest

from splrsdp.graph_core import Graph, TreeDecomposition

# 12-vertex chordal test graph with treewidth 3 and known maximal cliques:
# an inner 6-cycle braced by two chords plus one pendant triangle per
# inner edge.
CHORDAL12_CLIQUES = [
    frozenset({1, 6, 7}),
    frozenset({1, 2, 8}),
    frozenset({2, 3, 9}),
    frozenset({3, 4, 10}),
    frozenset({4, 5, 11}),
    frozenset({5, 6, 12}),
    frozenset({1, 2, 5, 6}),
    frozenset({2, 3, 4, 5}),
]


@pytest.fixture
def chordal12():
    edges = set()
    for c in CHORDAL12_CLIQUES:
        cs = sorted(c)
        for a in range(len(cs)):
            for b in range(a + 1, len(cs)):
                edges.add((cs[a], cs[b]))
    return Graph.from_edges(12, edges)


def random_valid_td(rng, p, max_new=3, max_keep=4):
    """Random valid tree decomposition with p nodes.

    Bags are built top-down: each node keeps a random subset of its parent's
    bag and introduces fresh vertices, which makes running intersection hold
    by construction.  Returns (graph, td) where the graph is the union of
    bag cliques.
    """
    parent = {1: None}
    for t in range(2, p + 1):
        parent[t] = int(rng.integers(1, t))
    next_v = 1
    bags = {}
    for t in range(1, p + 1):
        if parent[t] is None:
            inherited = set()
        else:
            pb = sorted(bags[parent[t]])
            keep = int(rng.integers(0, min(len(pb), max_keep) + 1))
            inherited = set(rng.choice(pb, size=keep, replace=False)) if keep else set()
        fresh = int(rng.integers(1 if not inherited else 0, max_new + 1))
        newv = set(range(next_v, next_v + fresh))
        next_v += fresh
        bags[t] = frozenset({int(v) for v in inherited} | newv)
    n = next_v - 1
    edges = set()
    for t in range(2, p + 1):
        edges.add((min(t, parent[t]), max(t, parent[t])))
    td = TreeDecomposition(nodes=tuple(range(1, p + 1)), edges=frozenset(edges), bags=bags)
    gedges = set()
    for bag in bags.values():
        bs = sorted(bag)
        for a in range(len(bs)):
            for b in range(a + 1, len(bs)):
                gedges.add((bs[a], bs[b]))
    return Graph.from_edges(n, gedges), td


def random_graph(rng, n, p_edge):
    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)
             if rng.random() < p_edge]
    return Graph.from_edges(n, edges)


def random_psd(rng, n, rank=None):
    r = rank if rank is not None else n
    f = rng.standard_normal((n, r))
    return f @ f.T


def random_splr_problem(rng, n, ell, p_edge=0.15, m_extra=3, graph=None):
    """Random SPLR instance: sparse parts on a random pattern, shared random
    factor, mixed equality/interval/one-sided rows."""
    from splrsdp.sdp_model import Constraint, SparseSymMatrix, SplrSdp, Term

    g = graph if graph is not None else random_graph(rng, n, p_edge)
    factor = rng.standard_normal((n, ell)) if ell else np.zeros((n, 0))

    def random_sparse(density=0.5):
        items = []
        for i, j in g.edges:
            if rng.random() < density:
                items.append((i, j, float(rng.standard_normal())))
        for i in range(1, n + 1):
            if rng.random() < density:
                items.append((i, i, float(rng.standard_normal())))
        return SparseSymMatrix.from_entries(n, items)

    def random_core():
        if not ell:
            return np.zeros((0, 0))
        C = rng.standard_normal((ell, ell))
        return 0.5 * (C + C.T)

    obj = Term(random_sparse(), random_core())
    cons = []
    for _ in range(m_extra):
        v = float(rng.standard_normal())
        kind = rng.integers(0, 3)
        if kind == 0:
            lo = hi = v
        elif kind == 1:
            lo, hi = v, v + float(rng.random())
        else:
            lo, hi = float("-inf"), v
        cons.append(Constraint(random_sparse(), random_core(), lo, hi))
    return SplrSdp(n=n, ell=ell, pattern=g, factor=factor,
                   objective=obj, constraints=cons)
