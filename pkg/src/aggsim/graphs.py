"""Dependency-graph construction: k-NNG, radius graphs, Euclidean MST,
maximal clique enumeration and proper edge coloring.

Graphs are immutable once built and shared freely across trial workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParameterError
from .geometry import Deployment

__all__ = [
    "UndirectedGraph",
    "CliqueSet",
    "EdgeColoring",
    "build_knng",
    "build_rgg",
    "build_mst",
    "build_complete",
    "maximal_cliques",
    "max_degree",
    "proper_edge_coloring",
    "save_edge_list",
    "load_edge_list",
    "save_cliques",
]

# Above this size, neighbor queries go through a KD-tree instead of the
# dense distance matrix.
_BRUTE_FORCE_LIMIT = 600


class UndirectedGraph:
    """Simple undirected graph on nodes 0..n-1 with sorted adjacency lists."""

    __slots__ = ("n", "edges", "adj")

    def __init__(self, n: int, edges):
        if n < 0:
            raise InvalidParameterError("node count must be nonnegative")
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidParameterError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParameterError(f"edge ({u},{v}) outside 0..{n - 1}")
            seen.add((u, v) if u < v else (v, u))
        self.n = int(n)
        self.edges = tuple(sorted(seen))
        adj = [[] for _ in range(n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        self.adj = tuple(tuple(sorted(a)) for a in adj)

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adj[u]

    def __repr__(self):
        return f"UndirectedGraph(n={self.n}, m={len(self.edges)})"


@dataclass(frozen=True)
class CliqueSet:
    """Maximal cliques of a graph; clique ids are positions in ``cliques``."""

    cliques: tuple

    def __len__(self):
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)


@dataclass(frozen=True)
class EdgeColoring:
    """Proper edge coloring: color[(u, v)] with u < v, colors 1..num_colors."""

    color: dict
    num_colors: int

    def is_proper(self, g: UndirectedGraph) -> bool:
        incident = [set() for _ in range(g.n)]
        for (u, v), c in self.color.items():
            if c in incident[u] or c in incident[v]:
                return False
            incident[u].add(c)
            incident[v].add(c)
        return set(self.color) == set(g.edges)


def _knn_ids(dep: Deployment, k: int) -> np.ndarray:
    """(n, k) array of each node's k nearest neighbors, ties by smaller id."""
    pos = dep.positions
    n = dep.n
    if n <= _BRUTE_FORCE_LIMIT:
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        # stable sort: equal distances resolve to the smaller column id
        order = np.argsort(dist, axis=1, kind="stable")
        return order[:, :k]
    tree = cKDTree(pos)
    kq = min(n, k + 8)
    dist, idx = tree.query(pos, k=kq)
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        cand = [(dist[i, j], idx[i, j]) for j in range(kq) if idx[i, j] != i]
        cand.sort()
        out[i] = [c[1] for c in cand[:k]]
    return out


def build_knng(dep: Deployment, k: int) -> UndirectedGraph:
    """Undirected union of every node's k-nearest-neighbor relation."""
    if not (1 <= k <= dep.n - 1):
        raise InvalidParameterError(f"need 1 <= k <= n-1, got k={k}, n={dep.n}")
    nbrs = _knn_ids(dep, k)
    edges = set()
    for i in range(dep.n):
        for j in nbrs[i]:
            edges.add((i, int(j)) if i < j else (int(j), i))
    return UndirectedGraph(dep.n, edges)


def build_rgg(dep: Deployment, rho: float) -> UndirectedGraph:
    """Connect every pair at Euclidean distance <= rho."""
    if rho <= 0:
        raise InvalidParameterError(f"radius must be positive, got {rho}")
    tree = cKDTree(dep.positions)
    pairs = tree.query_pairs(r=rho)
    return UndirectedGraph(dep.n, pairs)


def build_complete(n: int) -> UndirectedGraph:
    return UndirectedGraph(n, [(u, v) for u in range(n) for v in range(u + 1, n)])


def _candidate_edges(dep: Deployment):
    """Superset of the Euclidean MST edges (Delaunay edges when available)."""
    n, pos = dep.n, dep.positions
    if dep.d == 1:
        order = np.lexsort((np.arange(n), pos[:, 0]))
        return [(int(order[i]), int(order[i + 1])) for i in range(n - 1)]
    if n <= _BRUTE_FORCE_LIMIT or n <= dep.d + 2:
        return [(u, v) for u in range(n) for v in range(u + 1, n)]
    from scipy.spatial import Delaunay, QhullError

    try:
        tri = Delaunay(pos)
    except QhullError:
        return [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = set()
    for simplex in tri.simplices:
        for a in range(len(simplex)):
            for b in range(a + 1, len(simplex)):
                u, v = int(simplex[a]), int(simplex[b])
                edges.add((u, v) if u < v else (v, u))
    return sorted(edges)


def build_mst(dep: Deployment) -> UndirectedGraph:
    """Euclidean minimum spanning tree.

    Minimizes the total of any increasing function of the edge lengths, so the
    same tree is optimal for every path-loss exponent.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree

    n = dep.n
    if n == 1:
        return UndirectedGraph(1, [])
    cand = _candidate_edges(dep)
    us = np.array([e[0] for e in cand])
    vs = np.array([e[1] for e in cand])
    # +1 keeps coincident points (length 0) as explicit sparse entries; a
    # constant shift applied to every edge does not change the MST.
    w = np.linalg.norm(dep.positions[us] - dep.positions[vs], axis=1) + 1.0
    mat = coo_matrix((w, (us, vs)), shape=(n, n))
    tree = minimum_spanning_tree(mat).tocoo()
    edges = [(int(u), int(v)) for u, v in zip(tree.row, tree.col)]
    g = UndirectedGraph(n, edges)
    if len(g.edges) != n - 1:
        raise InvalidParameterError("point set produced a disconnected candidate graph")
    return g


def max_degree(g: UndirectedGraph) -> int:
    return max((len(a) for a in g.adj), default=0) if g.n else 0


def maximal_cliques(g: UndirectedGraph) -> CliqueSet:
    """Enumerate inclusion-maximal cliques (Bron-Kerbosch with pivoting).

    Isolated nodes come out as singleton cliques, so every node appears in at
    least one clique.
    """
    nbrs = [set(a) for a in g.adj]
    out = []

    def expand(r, p, x):
        if not p and not x:
            out.append(tuple(sorted(r)))
            return
        pivot = max(p | x, key=lambda u: (len(p & nbrs[u]), -u))
        for v in sorted(p - nbrs[pivot]):
            expand(r | {v}, p & nbrs[v], x & nbrs[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(range(g.n)), set())
    return CliqueSet(tuple(sorted(out)))


class _ColoringState:
    """Mutable bookkeeping for the Misra-Gries fan/rotation procedure."""

    def __init__(self, g: UndirectedGraph):
        self.g = g
        self.num_colors = max_degree(g) + 1 if g.edges else 0
        self.colorof = {}  # (u, v) sorted -> color
        self.used = [dict() for _ in range(g.n)]  # node -> {color: neighbor}

    def key(self, u, v):
        return (u, v) if u < v else (v, u)

    def set_color(self, u, v, c):
        k = self.key(u, v)
        old = self.colorof.get(k)
        if old is not None:
            del self.used[u][old]
            del self.used[v][old]
        self.colorof[k] = c
        self.used[u][c] = v
        self.used[v][c] = u

    def uncolor(self, u, v):
        k = self.key(u, v)
        old = self.colorof.pop(k)
        del self.used[u][old]
        del self.used[v][old]

    def color_at(self, u, v):
        return self.colorof.get(self.key(u, v))

    def free_color(self, v):
        for c in range(1, self.num_colors + 1):
            if c not in self.used[v]:
                return c
        raise AssertionError("no free color; degree bookkeeping broke")

    def invert_path(self, start, c, d):
        """Swap colors c and d along the maximal alternating path from start.

        ``start`` must be missing at least one of the two colors, so it is an
        endpoint of its path in the c/d edge subgraph.
        """
        want = c if c in self.used[start] else d
        node = start
        chain = []
        while want in self.used[node]:
            nxt = self.used[node][want]
            chain.append((node, nxt, want))
            node = nxt
            want = d if want == c else c
        for u, v, _ in chain:
            self.uncolor(u, v)
        for u, v, col in chain:
            self.set_color(u, v, d if col == c else c)


def proper_edge_coloring(g: UndirectedGraph) -> EdgeColoring:
    """Proper edge coloring with at most max_degree + 1 colors (Misra-Gries)."""
    st = _ColoringState(g)
    for u, v in g.edges:
        _color_one_edge(st, u, v)
    return EdgeColoring(color=dict(st.colorof), num_colors=st.num_colors)


def _build_fan(st: _ColoringState, u: int, v: int):
    """Maximal fan of u starting at v: color(u, fan[i+1]) is free at fan[i]."""
    fan = [v]
    in_fan = {v}
    while True:
        last = fan[-1]
        nxt = None
        for w in st.g.adj[u]:
            if w in in_fan:
                continue
            cw = st.color_at(u, w)
            if cw is not None and cw not in st.used[last]:
                nxt = w
                break
        if nxt is None:
            return fan
        fan.append(nxt)
        in_fan.add(nxt)


def _is_fan(st: _ColoringState, u: int, fan) -> bool:
    for i in range(len(fan) - 1):
        cw = st.color_at(u, fan[i + 1])
        if cw is None or cw in st.used[fan[i]]:
            return False
    return True


def _rotate_fan(st: _ColoringState, u: int, fan):
    """Shift colors one step toward the fan start, freeing the last edge.

    (u, fan[0]) is uncolored on entry; on exit (u, fan[-1]) is uncolored and
    every other fan edge carries its successor's former color.
    """
    cols = [st.color_at(u, w) for w in fan]
    for w in fan[1:]:
        st.uncolor(u, w)
    for i in range(len(fan) - 1):
        st.set_color(u, fan[i], cols[i + 1])


def _color_one_edge(st: _ColoringState, u: int, v: int):
    fan = _build_fan(st, u, v)
    c = st.free_color(u)
    d = st.free_color(fan[-1])
    if d != c and d in st.used[u]:
        st.invert_path(u, c, d)
    # d is now free at u; rotate onto the shortest fan prefix whose tip also
    # has d free under the post-inversion colors.
    for i, w in enumerate(fan):
        prefix = fan[: i + 1]
        if d not in st.used[w] and _is_fan(st, u, prefix):
            _rotate_fan(st, u, prefix)
            st.set_color(u, w, d)
            return
    raise AssertionError("no colorable fan prefix; fan bookkeeping broke")


def save_edge_list(g: UndirectedGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# aggsim graph v1\n# n={g.n} m={len(g.edges)}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def load_edge_list(path) -> UndirectedGraph:
    n = None
    edges = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("n="):
                        n = int(tok[2:])
                continue
            u, v = line.split()
            edges.append((int(u), int(v)))
    if n is None:
        n = max((max(e) for e in edges), default=-1) + 1
    return UndirectedGraph(n, edges)


def save_cliques(cs: CliqueSet, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# aggsim cliques v1\n# count={len(cs)}\n")
        for clique in cs:
            fh.write(" ".join(str(v) for v in clique) + "\n")
