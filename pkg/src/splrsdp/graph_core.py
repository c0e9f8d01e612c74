"""Undirected graphs, tree decompositions, and chordal graph machinery.

Vertices are 1-based integers throughout, matching the text file format
("n m" header, one "i j" line per edge).  Tree decomposition nodes carry
integer ids; bags map node ids to vertex sets.
"""

from collections import deque
from dataclasses import dataclass, field

__all__ = [
    "Graph",
    "TreeDecomposition",
    "read_graph",
    "write_graph",
    "validate_decomposition",
    "width",
    "chordal_complete",
    "is_chordal",
    "clique_tree",
    "split_vertex",
    "to_binary",
    "root_binary",
    "brute_force_treewidth",
]


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 1..n; edges stored as (i, j), i < j."""

    n: int
    edges: frozenset

    @staticmethod
    def from_edges(n, edges):
        norm = set()
        for i, j in edges:
            if i == j:
                raise ValueError("self-loop at vertex %d" % i)
            if not (1 <= i <= n and 1 <= j <= n):
                raise ValueError("edge (%d, %d) outside 1..%d" % (i, j, n))
            norm.add((min(i, j), max(i, j)))
        return Graph(n, frozenset(norm))

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in self.edges

    def adjacency(self):
        """Vertex -> set of neighbors, including isolated vertices."""
        adj = {v: set() for v in range(1, self.n + 1)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


@dataclass(eq=False)
class TreeDecomposition:
    """Tree of bags.  `bags` maps node id -> frozenset of graph vertices.

    `root` is optional; parent/children maps are available once rooted.
    Instances are treated as immutable: operations return new values.
    """

    nodes: tuple
    edges: frozenset
    bags: dict
    root: int = None
    _parent: dict = field(default=None, repr=False)
    _children: dict = field(default=None, repr=False)

    def neighbors(self):
        adj = {t: set() for t in self.nodes}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def _orient(self):
        if self.root is None:
            raise ValueError("decomposition is not rooted")
        adj = self.neighbors()
        parent = {self.root: None}
        children = {t: [] for t in self.nodes}
        queue = deque([self.root])
        while queue:
            t = queue.popleft()
            for u in sorted(adj[t]):
                if u not in parent:
                    parent[u] = t
                    children[t].append(u)
                    queue.append(u)
        object.__setattr__(self, "_parent", parent)
        object.__setattr__(self, "_children", children)

    def parent(self, t):
        if self._parent is None:
            self._orient()
        return self._parent[t]

    def children(self, t):
        if self._children is None:
            self._orient()
        return list(self._children[t])

    def postorder(self):
        """Node ids, children before parents, root last.

        Iterative because large decompositions would blow the recursion limit.
        """
        if self._children is None:
            self._orient()
        out = []
        stack = [(self.root, False)]
        while stack:
            t, done = stack.pop()
            if done:
                out.append(t)
                continue
            stack.append((t, True))
            for c in reversed(sorted(self._children[t])):
                stack.append((c, False))
        return out


def read_graph(path_or_file):
    """Read the plain text format: first line "n m", then m lines "i j"."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    tokens = text.split()
    if len(tokens) < 2:
        raise ValueError("graph file too short")
    n, m = int(tokens[0]), int(tokens[1])
    if len(tokens) != 2 + 2 * m:
        raise ValueError("expected %d edge tokens, got %d" % (2 * m, len(tokens) - 2))
    edges = []
    for e in range(m):
        edges.append((int(tokens[2 + 2 * e]), int(tokens[3 + 2 * e])))
    return Graph.from_edges(n, edges)


def write_graph(g, fh):
    fh.write("%d %d\n" % (g.n, len(g.edges)))
    for i, j in sorted(g.edges):
        fh.write("%d %d\n" % (i, j))


def width(td):
    """Largest bag size minus one."""
    if not td.bags:
        raise ValueError("decomposition has no bags")
    return max(len(b) for b in td.bags.values()) - 1


def validate_decomposition(td, g):
    """True iff td is a tree whose bags cover vertices and edges of g and
    satisfy the running intersection property."""
    nodes = set(td.nodes)
    if not nodes or set(td.bags) != nodes:
        return False
    for a, b in td.edges:
        if a not in nodes or b not in nodes:
            return False
    # tree: connected with |V|-1 edges
    if len(td.edges) != len(nodes) - 1:
        return False
    adj = td.neighbors()
    seen = {next(iter(nodes))}
    queue = deque(seen)
    while queue:
        t = queue.popleft()
        for u in adj[t]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    if seen != nodes:
        return False
    # bags live inside 1..n
    for bag in td.bags.values():
        for v in bag:
            if not (1 <= v <= g.n):
                return False
    # vertex cover
    covered = set()
    for bag in td.bags.values():
        covered |= bag
    if covered != set(range(1, g.n + 1)):
        return False
    # edge cover
    for i, j in g.edges:
        if not any(i in bag and j in bag for bag in td.bags.values()):
            return False
    # running intersection: occurrences of each vertex induce a subtree
    occ = {}
    for t in td.nodes:
        for v in td.bags[t]:
            occ.setdefault(v, set()).add(t)
    for v, ts in occ.items():
        start = next(iter(ts))
        seen = {start}
        queue = deque([start])
        while queue:
            t = queue.popleft()
            for u in adj[t]:
                if u in ts and u not in seen:
                    seen.add(u)
                    queue.append(u)
        if seen != ts:
            return False
    return True


def chordal_complete(g):
    """Minimum-degree fill-in.

    Returns (chordal supergraph, elimination order).  The order is a perfect
    elimination ordering of the returned graph.  Ties on degree break toward
    the smallest vertex index, so the result is deterministic.
    """
    adj = g.adjacency()
    remaining = set(adj)
    fill = set(g.edges)
    order = []
    while remaining:
        v = min(remaining, key=lambda u: (len(adj[u]), u))
        order.append(v)
        nbrs = list(adj[v])
        for a in range(len(nbrs)):
            for b in range(a + 1, len(nbrs)):
                x, y = nbrs[a], nbrs[b]
                if y not in adj[x]:
                    adj[x].add(y)
                    adj[y].add(x)
                    fill.add((min(x, y), max(x, y)))
        for u in nbrs:
            adj[u].discard(v)
        remaining.remove(v)
    return Graph(g.n, frozenset(fill)), tuple(order)


def _mcs_order(g):
    """Maximum cardinality search visit order (ties -> smallest index)."""
    adj = g.adjacency()
    weight = {v: 0 for v in adj}
    visited = []
    unvisited = set(adj)
    while unvisited:
        v = max(unvisited, key=lambda u: (weight[u], -u))
        visited.append(v)
        unvisited.remove(v)
        for u in adj[v]:
            if u in unvisited:
                weight[u] += 1
    return visited


def _is_peo(g, order):
    """Check that eliminating in `order` never needs a fill edge."""
    adj = g.adjacency()
    pos = {v: i for i, v in enumerate(order)}
    for v in order:
        later = [u for u in adj[v] if pos[u] > pos[v]]
        for a in range(len(later)):
            for b in range(a + 1, len(later)):
                if later[b] not in adj[later[a]]:
                    return False
    return True


def is_chordal(g):
    return _is_peo(g, list(reversed(_mcs_order(g))))


def clique_tree(g):
    """Maximal cliques of a chordal graph arranged in a junction tree.

    Node ids are 1..p in discovery order along the elimination ordering.  The
    tree is a maximum-weight spanning tree of the clique intersection graph,
    which guarantees the running intersection property.
    """
    peo = list(reversed(_mcs_order(g)))
    if not _is_peo(g, peo):
        raise ValueError("graph is not chordal")
    adj = g.adjacency()
    pos = {v: i for i, v in enumerate(peo)}
    candidates = []
    for v in peo:
        c = frozenset({v} | {u for u in adj[v] if pos[u] > pos[v]})
        candidates.append(c)
    cliques = []
    for c in candidates:
        if not any(c < d for d in candidates):
            if c not in cliques:
                cliques.append(c)
    p = len(cliques)
    bags = {t + 1: cliques[t] for t in range(p)}
    if p == 1:
        return TreeDecomposition(nodes=(1,), edges=frozenset(), bags=bags)
    # Prim over intersection weights; ties favor small node ids so the
    # tree is reproducible
    best_w = {t: len(bags[t] & bags[1]) for t in range(2, p + 1)}
    best_s = {t: 1 for t in range(2, p + 1)}
    edges = set()
    out = set(range(2, p + 1))
    while out:
        t = max(out, key=lambda u: (best_w[u], -u))
        out.remove(t)
        s = best_s[t]
        edges.add((min(s, t), max(s, t)))
        for u in out:
            w = len(bags[u] & bags[t])
            if w > best_w[u] or (w == best_w[u] and t < best_s[u]):
                best_w[u] = w
                best_s[u] = t
    return TreeDecomposition(nodes=tuple(range(1, p + 1)), edges=frozenset(edges), bags=bags)


def split_vertex(td, x):
    """Replace a node of degree k >= 4 by a path of k copies of its bag.

    Neighbor i (ascending id) attaches to the i-th copy, so the result is
    deterministic.  Width is unchanged and every new node has degree <= 3.
    """
    adj = td.neighbors()
    nbrs = sorted(adj[x])
    k = len(nbrs)
    if k < 4:
        raise ValueError("node %d has degree %d < 4" % (x, k))
    base = max(td.nodes)
    new_ids = [base + i + 1 for i in range(k)]
    nodes = tuple(t for t in td.nodes if t != x) + tuple(new_ids)
    bags = {t: td.bags[t] for t in td.nodes if t != x}
    for t in new_ids:
        bags[t] = td.bags[x]
    edges = {e for e in td.edges if x not in e}
    for a, b in zip(new_ids, new_ids[1:]):
        edges.add((a, b))
    for y, t in zip(nbrs, new_ids):
        edges.add((min(y, t), max(y, t)))
    return TreeDecomposition(nodes=nodes, edges=frozenset(edges), bags=bags)


def to_binary(td):
    """Split high-degree nodes until every node has degree <= 3.

    Processes the smallest-id node of degree >= 4 first; splits only create
    nodes of degree <= 3, so each original offender is handled exactly once.
    Node count at most doubles and the width is preserved.
    """
    adj = {t: set() for t in td.nodes}
    for a, b in td.edges:
        adj[a].add(b)
        adj[b].add(a)
    high = {t for t in td.nodes if len(adj[t]) >= 4}
    out = td
    while high:
        x = min(high)
        out = split_vertex(out, x)
        high.discard(x)
    return out


def _degrees(td):
    deg = {t: 0 for t in td.nodes}
    for a, b in td.edges:
        deg[a] += 1
        deg[b] += 1
    return deg


def root_binary(td, root=None):
    """Pick a root of degree < 3 and orient the tree.

    Default: for a path, the smallest-id endpoint; otherwise the smallest id
    among nodes of degree < 3.  An explicit `root` must have degree < 3.
    """
    deg = _degrees(td)
    if max(deg.values(), default=0) > 3:
        raise ValueError("decomposition is not binary (degree > 3)")
    if root is None:
        if all(d <= 2 for d in deg.values()):
            ends = [t for t in td.nodes if deg[t] <= 1]
            root = min(ends)
        else:
            root = min(t for t in td.nodes if deg[t] < 3)
    elif deg[root] >= 3:
        raise ValueError("requested root %d has degree %d" % (root, deg[root]))
    return TreeDecomposition(nodes=td.nodes, edges=td.edges, bags=dict(td.bags), root=root)


def brute_force_treewidth(g):
    """Exact treewidth by dynamic programming over elimination prefixes.

    Only for n <= 12.  For an eliminated set S the fill neighborhood of v is
    order independent: u is adjacent iff reachable from v through S.  That
    makes f(S) = best achievable max-degree well defined on subsets.
    """
    n = g.n
    if n > 12:
        raise ValueError("brute_force_treewidth limited to n <= 12")
    if n == 0:
        raise ValueError("empty graph")
    adj = [0] * n
    for i, j in g.edges:
        adj[i - 1] |= 1 << (j - 1)
        adj[j - 1] |= 1 << (i - 1)

    def elim_degree(S, v):
        # neighbors of v after eliminating S: reachable through S vertices
        seen = 1 << v
        frontier = 1 << v
        reach = 0
        while frontier:
            nbrs = 0
            f = frontier
            while f:
                low = f & -f
                f ^= low
                nbrs |= adj[low.bit_length() - 1]
            nbrs &= ~seen
            reach |= nbrs & ~S
            frontier = nbrs & S
            seen |= nbrs
        return bin(reach).count("1")

    full = (1 << n) - 1
    INF = n + 1
    f = [INF] * (1 << n)
    f[0] = 0
    by_count = sorted(range(1 << n), key=lambda s: bin(s).count("1"))
    for S in by_count:
        if f[S] == INF:
            continue
        rest = full & ~S
        r = rest
        while r:
            low = r & -r
            r ^= low
            v = low.bit_length() - 1
            cost = max(f[S], elim_degree(S, v))
            T = S | low
            if cost < f[T]:
                f[T] = cost
    return f[full]
