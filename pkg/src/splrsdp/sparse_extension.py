"""Sparse extension: trade the shared low-rank factor for auxiliary rows.

Given a problem whose data matrices are pattern-sparse plus factor @ core @
factor.T, and a rooted binary tree decomposition of the pattern, this module
builds an equivalent SDP in dimension n + k*ell.  Each decomposition node t
gets ell auxiliary indices that accumulate partial products factor.T @ X
along the tree; rank-one "accumulator" equality constraints tie them
together, and the low-rank part of every constraint becomes a small dense
block on the root's auxiliary indices.
"""

from dataclasses import dataclass

import numpy as np

from .graph_core import Graph, TreeDecomposition, validate_decomposition
from .sdp_model import FactoredSolution, eval_term

__all__ = [
    "BagPartition",
    "ExtendedPattern",
    "ExtendedSdp",
    "canonical_relabel",
    "partition_bags",
    "build_extended_pattern",
    "build_extension",
    "extend_solution",
    "restrict_solution",
    "null_residuals",
    "eval_extended",
    "verify_extension",
]


@dataclass
class BagPartition:
    """W_t = bag(t) minus the parent's bag; the W_t partition the vertices."""

    w: dict  # node -> frozenset


@dataclass
class ExtendedPattern:
    """Index bookkeeping for the extended problem.

    Nodes are relabeled 1..k so that children precede parents and the root is
    k.  Auxiliary indices for node t are u[t] = (n+(t-1)ell+1, ..., n+t*ell);
    ext_bags[t] = bag(t) + u[t] + children's u blocks.  `graph` is the
    extended data-sparsity graph; the solver side works with the larger
    chordal cover in which every extended bag is a clique.
    """

    n: int
    ell: int
    k: int
    td: TreeDecomposition  # relabeled, rooted at k
    node_order: tuple  # node_order[t-1] = original node id of label t
    w: dict  # node -> frozenset, bag partition
    u: dict  # node -> tuple of auxiliary indices
    ext_bags: dict  # node -> frozenset
    graph: Graph  # on n + k*ell vertices

    @property
    def n_ext(self):
        return self.n + self.k * self.ell

    @property
    def index_i(self):
        """Indices of the original variable inside the extension."""
        return tuple(range(1, self.n + 1))

    @property
    def index_j(self):
        """Root auxiliary indices carrying factor.T @ X @ factor."""
        return self.u[self.k]


@dataclass
class ExtendedSdp:
    """The extended problem: base data re-read on the extension plus
    per-node accumulator constraints (a_mats[t].T @ X_block @ a_mats[t] = 0).
    """

    base: object  # SplrSdp
    pattern: ExtendedPattern
    a_mats: dict  # node -> ndarray (len(ext_bag) x ell), rows follow sorted(ext_bag)

    @property
    def n_ext(self):
        return self.pattern.n_ext


def partition_bags(td):
    """Difference sets W_t = bag(t) \\ bag(parent(t)) of a rooted decomposition.

    For a valid decomposition these partition the union of all bags: the
    occurrences of a vertex form a subtree, and W_t keeps the vertex only at
    that subtree's highest node.
    """
    if td.root is None:
        raise ValueError("decomposition is not rooted")
    w = {}
    seen = {}
    for t in td.nodes:
        p = td.parent(t)
        wt = td.bags[t] if p is None else td.bags[t] - td.bags[p]
        w[t] = frozenset(wt)
        for v in wt:
            if v in seen:
                raise ValueError("vertex %d appears in W_%d and W_%d; "
                                 "running intersection violated" % (v, seen[v], t))
            seen[v] = t
    covered = set()
    for bag in td.bags.values():
        covered |= bag
    if set(seen) != covered:
        raise ValueError("bag difference sets do not cover all vertices")
    return BagPartition(w=w)


def canonical_relabel(td):
    """Relabel a rooted decomposition to 1..k in post-order.

    Children then carry smaller labels than parents and the root becomes k.
    Returns (new_td, node_order) with node_order[t-1] = old id of label t.
    """
    order = td.postorder()
    new_of = {old: i + 1 for i, old in enumerate(order)}
    k = len(order)
    nodes = tuple(range(1, k + 1))
    edges = frozenset((min(new_of[a], new_of[b]), max(new_of[a], new_of[b]))
                      for a, b in td.edges)
    bags = {new_of[t]: td.bags[t] for t in td.nodes}
    out = TreeDecomposition(nodes=nodes, edges=edges, bags=bags, root=k)
    return out, tuple(order)


def _check_rooted_binary(td):
    if td.root is None:
        raise ValueError("decomposition is not rooted")
    deg = {t: 0 for t in td.nodes}
    for a, b in td.edges:
        deg[a] += 1
        deg[b] += 1
    if deg and max(deg.values()) > 3:
        raise ValueError("decomposition is not binary")
    if len(td.children(td.root)) > 2:
        raise ValueError("root has more than two children")


def build_extended_pattern(pattern, td, ell):
    """Extended graph and bags for `ell` auxiliary indices per node."""
    _check_rooted_binary(td)
    ctd, node_order = canonical_relabel(td)
    n = pattern.n
    k = len(ctd.nodes)
    part = partition_bags(ctd)
    u = {t: tuple(range(n + (t - 1) * ell + 1, n + t * ell + 1)) for t in ctd.nodes}
    edges = set(pattern.edges)
    for t in ctd.nodes:
        ut = u[t]
        for a in range(ell):
            for b in range(a + 1, ell):
                edges.add((ut[a], ut[b]))
        attach = [t] if ctd.parent(t) is None else [t, ctd.parent(t)]
        for i in attach:
            for v in ctd.bags[i]:
                for x in ut:
                    edges.add((min(v, x), max(v, x)))
    ext_bags = {}
    for t in ctd.nodes:
        bag = set(ctd.bags[t]) | set(u[t])
        for j in ctd.children(t):
            bag |= set(u[j])
        ext_bags[t] = frozenset(bag)
    g = Graph.from_edges(n + k * ell, edges)
    return ExtendedPattern(n=n, ell=ell, k=k, td=ctd, node_order=node_order,
                           w=part.w, u=u, ext_bags=ext_bags, graph=g)


def build_extension(p, td):
    """Build the extended problem for `p` over the rooted binary `td`.

    The decomposition must be valid for p.pattern.  Auxiliary constraint
    matrices a_mats[t] hold the factor rows on W_t, zeros on the rest of the
    bag, +I on child accumulator blocks, and -I on the node's own block.
    """
    if not validate_decomposition(td, p.pattern):
        raise ValueError("decomposition is not valid for the problem pattern")
    ext = build_extended_pattern(p.pattern, td, p.ell)
    a_mats = {}
    for t in ext.td.nodes:
        bag = sorted(ext.ext_bags[t])
        pos = {v: i for i, v in enumerate(bag)}
        A = np.zeros((len(bag), ext.ell))
        for v in ext.w[t]:
            A[pos[v], :] = p.factor[v - 1, :]
        for j in ext.td.children(t):
            for h, x in enumerate(ext.u[j]):
                A[pos[x], h] = 1.0
        for h, x in enumerate(ext.u[t]):
            A[pos[x], h] = -1.0
        a_mats[t] = A
    return ExtendedSdp(base=p, pattern=ext, a_mats=a_mats)


def extend_solution(ext, sol):
    """Lift a factored solution into the extended dimension.

    Auxiliary rows accumulate factor-row combinations bottom-up; the label
    order 1..k already puts children first.
    """
    pat = ext.pattern
    R = sol.factor
    r = R.shape[1]
    out = np.zeros((pat.n_ext, r))
    out[:pat.n, :] = R
    fac = ext.base.factor
    for t in range(1, pat.k + 1):
        for h in range(pat.ell):
            row = np.zeros(r)
            for v in pat.w[t]:
                row += fac[v - 1, h] * R[v - 1, :]
            for j in pat.td.children(t):
                row += out[pat.u[j][h] - 1, :]
            out[pat.u[t][h] - 1, :] = row
    return FactoredSolution(out)


def restrict_solution(ext_sol, ext):
    """Drop the auxiliary rows: rows 1..n of the extended factor."""
    return FactoredSolution(ext_sol.factor[:ext.pattern.n, :].copy())


def null_residuals(ext, ext_sol):
    """max |a_mats[t].T X a_mats[t]| per node for a factored extended point."""
    out = {}
    for t, A in ext.a_mats.items():
        bag = sorted(ext.pattern.ext_bags[t])
        rows = ext_sol.factor[[v - 1 for v in bag], :]
        G = A.T @ rows
        out[t] = float(np.abs(G @ G.T).max()) if G.size else 0.0
    return out


def eval_extended(ext, ext_sol):
    """Objective and constraint values of the extended problem.

    Uses the sparse parts on the original indices and the cores on the root
    accumulator block.
    """
    p = ext.base
    pat = ext.pattern
    R = ext_sol.factor
    rows_j = R[[x - 1 for x in pat.index_j], :]
    block_j = rows_j @ rows_j.T

    def value(term):
        v = term.sparse.inner_rows(R)
        if pat.ell:
            v += float(np.sum(term.core * block_j))
        return v

    return value(p.objective), [value(c.term) for c in p.constraints]


def verify_extension(p, ext, samples=100, seed=0, tol=1e-10):
    """Certify the extension numerically on random lifted points.

    For each sample X = RR^T: accumulator constraints vanish, extended
    objective/constraint values equal the originals, and restriction gives R
    back bit-exactly.  Returns a report dict; "ok" is the overall verdict.
    """
    rng = np.random.default_rng(seed)
    worst_null = 0.0
    worst_val = 0.0
    worst_restrict = 0.0
    for _ in range(samples):
        r = int(rng.integers(1, p.n + 1))
        sol = FactoredSolution(rng.standard_normal((p.n, r)) / np.sqrt(r))
        lifted = extend_solution(ext, sol)
        res = null_residuals(ext, lifted)
        worst_null = max(worst_null, max(res.values(), default=0.0))
        obj, vals = eval_extended(ext, lifted)
        worst_val = max(worst_val, abs(obj - eval_term(p, p.objective, sol)))
        for i, c in enumerate(p.constraints):
            worst_val = max(worst_val, abs(vals[i] - eval_term(p, c.term, sol)))
        back = restrict_solution(lifted, ext)
        worst_restrict = max(worst_restrict, float(np.abs(back.factor - sol.factor).max()))
    return {
        "samples": samples,
        "max_null_residual": worst_null,
        "max_value_mismatch": worst_val,
        "max_restriction_error": worst_restrict,
        "ok": worst_null <= tol and worst_val <= 10 * tol and worst_restrict == 0.0,
    }
