"""Aggregation trees: the latency recursion, the location-free and the
location-aware (bisection) minimum-latency constructions, plus small-scale
brute-force oracles used by the test suite.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InvalidParameterError, InvalidStructureError
from .geometry import (
    Deployment,
    EnergyParams,
    Region,
    _bisect_core,
    ceil_log2,
    enclosing_region,
)

__all__ = [
    "AggregationTree",
    "tree_latency",
    "brute_force_min_latency",
    "brute_force_min_makespan",
    "build_min_latency_tree",
    "build_bisection_tree",
    "tree_energy",
    "save_tree",
    "load_tree",
]

# Brute-force oracles enumerate labeled rooted trees / slot assignments and
# are only meant for single-digit node counts.
_ORACLE_MAX_N = 9
_MAKESPAN_MAX_N = 8


class AggregationTree:
    """Rooted tree as a parent array, optionally tagged with the construction
    iteration that added each edge (1-based, only for the iterative builders).
    """

    __slots__ = ("n", "root", "parent", "level", "_children")

    def __init__(self, parent, root: int, level=None):
        parent = [int(p) for p in parent]
        n = len(parent)
        if not (0 <= root < n):
            raise InvalidStructureError(f"root {root} outside 0..{n - 1}")
        if parent[root] != -1:
            raise InvalidStructureError("root must have parent -1")
        children = [[] for _ in range(n)]
        for v, p in enumerate(parent):
            if v == root:
                continue
            if not (0 <= p < n):
                raise InvalidStructureError(f"node {v} has invalid parent {p}")
            children[p].append(v)
        # reachability doubles as the acyclicity check
        seen = 1
        stack = [root]
        while stack:
            v = stack.pop()
            for c in children[v]:
                seen += 1
                stack.append(c)
        if seen != n:
            raise InvalidStructureError("parent array is cyclic or disconnected")
        self.n = n
        self.root = int(root)
        self.parent = tuple(parent)
        self.level = None if level is None else tuple(int(x) for x in level)
        self._children = tuple(tuple(c) for c in children)

    @property
    def children(self):
        return self._children

    def edges(self):
        """(parent, child) pairs."""
        return [(self.parent[v], v) for v in range(self.n) if v != self.root]

    def __repr__(self):
        return f"AggregationTree(n={self.n}, root={self.root})"


def _bfs_order(t: AggregationTree):
    order = [t.root]
    for v in order:
        order.extend(t.children[v])
    return order


def tree_latency(t: AggregationTree) -> int:
    """Slots needed to aggregate the whole tree into its root.

    Children are served in order of decreasing subtree latency; the value is
    max_i (i + latency(child_i)) over that ranking.  Iterative, so trees with
    millions of nodes are fine.
    """
    order = _bfs_order(t)
    lat = [0] * t.n
    for v in reversed(order):
        subs = sorted((lat[c] for c in t.children[v]), reverse=True)
        lat[v] = max((rank + 1 + lsub for rank, lsub in enumerate(subs)), default=0)
    return lat[t.root]


def subtree_latencies(t: AggregationTree):
    """Per-node latency of the subtree hanging below each node."""
    order = _bfs_order(t)
    lat = [0] * t.n
    for v in reversed(order):
        subs = sorted((lat[c] for c in t.children[v]), reverse=True)
        lat[v] = max((rank + 1 + lsub for rank, lsub in enumerate(subs)), default=0)
    return lat


def iter_rooted_trees(n: int, root: int = 0):
    """All labeled rooted trees on n nodes, as parent arrays with the
    convention parent[v] in {root} U {smaller ids}.

    Every rooted tree shape occurs among these (relabel nodes in BFS order),
    which is all the latency oracle needs since latency ignores labels.
    """
    if root != 0:
        raise InvalidParameterError("tree enumeration assumes root id 0")
    if n == 1:
        yield AggregationTree([-1], 0)
        return
    for choice in itertools.product(*(range(v) for v in range(1, n))):
        yield AggregationTree([-1, *choice], 0)


def brute_force_min_latency(n: int) -> int:
    """Minimum of tree_latency over every rooted tree on n nodes."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if n > _ORACLE_MAX_N:
        raise InvalidParameterError(
            f"exhaustive tree enumeration is refused for n > {_ORACLE_MAX_N}"
        )
    return min(tree_latency(t) for t in iter_rooted_trees(n))


def brute_force_min_makespan(t: AggregationTree) -> int:
    """Minimum schedule makespan of a given tree by exhaustive slot search.

    A feasible schedule assigns each non-root node one transmission slot that
    is (a) later than all of its children's slots and (b) distinct among
    siblings.  Independent of the latency recursion; used to validate it.
    """
    if t.n > _MAKESPAN_MAX_N:
        raise InvalidParameterError(
            f"exhaustive schedule search is refused for n > {_MAKESPAN_MAX_N}"
        )
    if t.n == 1:
        return 0
    order = _bfs_order(t)  # parents before children

    def feasible(horizon: int) -> bool:
        slot = {t.root: horizon + 1}
        sibling_used = {v: set() for v in range(t.n)}

        def place(idx: int) -> bool:
            if idx == len(order):
                return True
            v = order[idx]
            if v == t.root:
                return place(idx + 1)
            p = t.parent[v]
            for s in range(slot[p] - 1, 0, -1):
                if s in sibling_used[p]:
                    continue
                slot[v] = s
                sibling_used[p].add(s)
                if place(idx + 1):
                    return True
                sibling_used[p].remove(s)
            return False

        return place(0)

    horizon = 1
    while not feasible(horizon):
        horizon += 1
    return horizon


def build_min_latency_tree(n: int, root: int = 0) -> AggregationTree:
    """Location-free minimum-latency tree: ceil(log2 n) growth iterations,
    every tree node adopting one fresh child per iteration.
    """
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    if not (0 <= root < n):
        raise InvalidParameterError(f"root {root} outside 0..{n - 1}")
    parent = [-1] * n
    level = [0] * n
    adopted = [root]
    pending = [v for v in range(n) if v != root]
    pending.reverse()  # pop() yields ascending ids
    for k in range(1, ceil_log2(n) + 1):
        for i in list(adopted):
            if not pending:
                break
            j = pending.pop()
            parent[j] = i
            level[j] = k
            adopted.append(j)
    return AggregationTree(parent, root, level)


def build_bisection_tree(dep: Deployment) -> AggregationTree:
    """Location-aware minimum-latency tree.

    Each tree node owns a region; per iteration it splits the region into two
    node-balanced halves and adopts the nearest node of the far half as a
    child, handing that half over.  Latency stays at ceil(log2 n) while edges
    shrink with the regions.
    """
    n = dep.n
    parent = [-1] * n
    level = [0] * n
    root = dep.root
    regions: dict[int, Region] = {root: enclosing_region(dep)}
    members: dict[int, np.ndarray] = {root: np.arange(n, dtype=np.int64)}
    adopted = [root]
    pos = dep.positions
    for k in range(1, ceil_log2(n) + 1):
        for i in list(adopted):
            mem = members[i]
            if mem.size < 2:
                continue
            b1, b2, mem1, mem2 = _bisect_core(regions[i], mem, pos[mem], i)
            d2 = ((pos[mem2] - pos[i]) ** 2).sum(axis=1)
            j = int(mem2[np.lexsort((mem2, d2))[0]])
            parent[j] = i
            level[j] = k
            adopted.append(j)
            regions[i], members[i] = b1, mem1
            regions[j], members[j] = b2, mem2
    if len(adopted) != n:
        raise InvalidStructureError("bisection failed to adopt every node")
    return AggregationTree(parent, root, level)


def tree_energy(t: AggregationTree, dep: Deployment, params: EnergyParams) -> float:
    """Total link energy of all tree edges (canonical edge order)."""
    if t.n != dep.n:
        raise InvalidParameterError("tree and deployment sizes differ")
    if t.n == 1:
        return 0.0
    pairs = sorted((p, v) if p < v else (v, p) for p, v in t.edges())
    pairs = np.array(pairs, dtype=np.int64)
    hop = np.linalg.norm(dep.positions[pairs[:, 0]] - dep.positions[pairs[:, 1]], axis=1)
    return float(np.sum(hop**params.nu))


def save_tree(t: AggregationTree, path) -> None:
    """One "node parent level" line per node; root has parent -1, level 0."""
    with open(path, "w") as fh:
        fh.write(f"# aggsim tree v1\n# n={t.n} root={t.root}\n")
        for v in range(t.n):
            lvl = t.level[v] if t.level is not None else 0
            fh.write(f"{v} {t.parent[v]} {lvl}\n")


def load_tree(path) -> AggregationTree:
    root = None
    rows = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("root="):
                        root = int(tok[5:])
                continue
            v, p, lvl = (int(x) for x in line.split())
            rows[v] = (p, lvl)
    n = len(rows)
    parent = [rows[v][0] for v in range(n)]
    level = [rows[v][1] for v in range(n)]
    if root is None:
        root = parent.index(-1)
    return AggregationTree(parent, root, level)
