"""Reference policies: aggregation along the Euclidean MST, and raw
forwarding of every measurement to the root without in-network computation.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .errors import InvalidParameterError
from .geometry import Deployment, EnergyParams
from .graphs import UndirectedGraph, _candidate_edges, build_mst
from .scheduling import Schedule, Transmission, schedule_tree
from .trees import AggregationTree, tree_energy, tree_latency

__all__ = [
    "mst_policy",
    "raw_forwarding_policy",
    "mst_tree",
    "least_energy_paths",
    "gabriel_graph",
]


def mst_tree(dep: Deployment) -> AggregationTree:
    """Euclidean MST oriented toward the deployment root."""
    g = build_mst(dep)
    parent = [-1] * dep.n
    seen = [False] * dep.n
    seen[dep.root] = True
    queue = [dep.root]
    for v in queue:
        for w in g.adj[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                queue.append(w)
    return AggregationTree(parent, dep.root)


def _tree_depth(t: AggregationTree) -> int:
    depth = [0] * t.n
    out = 0
    queue = [t.root]
    for v in queue:
        for c in t.children[v]:
            depth[c] = depth[v] + 1
            out = max(out, depth[c])
            queue.append(c)
    return out


def mst_policy(dep: Deployment, params: EnergyParams):
    """Aggregate along the minimum spanning tree with the optimal tree
    schedule; minimum energy among trees, but latency at least the depth."""
    t = mst_tree(dep)
    sched = schedule_tree(t)
    metrics = {
        "energy": tree_energy(t, dep, params),
        "latency": tree_latency(t),
        "depth": _tree_depth(t),
    }
    return sched, metrics


def gabriel_graph(dep: Deployment) -> UndirectedGraph:
    """Edges whose diametral ball contains no other node.

    Contains the Euclidean MST (hence connected) and, for path-loss exponents
    >= 2, at least one least-energy path between every node pair.
    """
    cand = _candidate_edges(dep)
    pos = dep.positions
    if not cand:
        return UndirectedGraph(dep.n, [])
    arr = np.asarray(cand, dtype=np.int64)
    mids = 0.5 * (pos[arr[:, 0]] + pos[arr[:, 1]])
    radii = 0.5 * np.linalg.norm(pos[arr[:, 0]] - pos[arr[:, 1]], axis=1)
    tree = cKDTree(pos)
    k = min(dep.n, 3)  # any interior point outranks both endpoints, so 3 suffice
    dist, idx = tree.query(mids, k=k)
    keep = []
    for e, (u, v) in enumerate(cand):
        r = radii[e] * (1.0 - 1e-12)
        ok = True
        for j in range(k):
            w = int(idx[e, j])
            if dist[e, j] >= r:
                break
            if w != u and w != v:
                ok = False
                break
        if ok:
            keep.append((u, v))
    return UndirectedGraph(dep.n, keep)


def least_energy_paths(dep: Deployment, params: EnergyParams):
    """Minimum-energy path from every node to the root, unrestricted hops.

    Returns a list mapping node -> path (node..root).  Exponent 1 keeps the
    direct link (relaying can never beat the triangle inequality); >= 2
    restricts the search to the Gabriel graph, which preserves optimality;
    in between falls back to the complete graph.
    """
    n, root, nu = dep.n, dep.root, params.nu
    pos = dep.positions
    if n == 1:
        return [[root]]
    if nu == 1.0:
        return [[v, root] if v != root else [root] for v in range(n)]
    if nu >= 2.0:
        g = gabriel_graph(dep)
        us = np.array([e[0] for e in g.edges], dtype=np.int64)
        vs = np.array([e[1] for e in g.edges], dtype=np.int64)
        w = np.linalg.norm(pos[us] - pos[vs], axis=1) ** nu
        mat = coo_matrix(
            (np.concatenate([w, w]), (np.concatenate([us, vs]), np.concatenate([vs, us]))),
            shape=(n, n),
        ).tocsr()
        _, pred = dijkstra(mat, indices=root, return_predecessors=True)
    else:
        if n > 4096:
            raise InvalidParameterError(
                "dense least-energy search is limited to n <= 4096 for 1 < nu < 2"
            )
        diff = pos[:, None, :] - pos[None, :, :]
        w = np.sqrt((diff**2).sum(axis=2)) ** nu
        _, pred = dijkstra(w, indices=root, return_predecessors=True)

    paths = []
    for v in range(n):
        if v == root:
            paths.append([root])
            continue
        path = [v]
        node = v
        while node != root:
            node = int(pred[node])
            if node < 0:
                raise InvalidParameterError(f"node {v} is unreachable from the root")
            path.append(node)
        paths.append(path)
    return paths


def raw_forwarding_policy(dep: Deployment, params: EnergyParams):
    """Route every measurement to the root with no aggregation.

    Messages are store-and-forward along their least-energy paths; hops pack
    greedily into the earliest conflict-free slot, longest routes first, and
    the single-port root receives at most one message per slot, so the
    makespan is at least n - 1.
    """
    n, root = dep.n, dep.root
    paths = least_energy_paths(dep, params)
    order = sorted(
        (v for v in range(n) if v != root),
        key=lambda v: (-(len(paths[v]) - 1), v),
    )
    busy = defaultdict(set)
    slot_map = defaultdict(list)
    root_cursor = 1
    for v in order:
        path = paths[v]
        t_prev = 0
        for a, b in zip(path[:-1], path[1:]):
            t = t_prev + 1
            if b == root:
                t = max(t, root_cursor)
            while t in busy[a] or t in busy[b]:
                t += 1
            busy[a].add(t)
            busy[b].add(t)
            slot_map[t].append(Transmission(a, b))
            if b == root:
                root_cursor = t + 1
            t_prev = t
    horizon = max(slot_map, default=0)
    slots = [slot_map.get(t, []) for t in range(1, horizon + 1)]
    sched = Schedule(n, slots)
    pair_energy = 0.0
    if n > 1:
        hops = []
        for v in range(n):
            if v != root:
                hops.extend(zip(paths[v][:-1], paths[v][1:]))
        arr = np.asarray(hops, dtype=np.int64)
        lengths = np.linalg.norm(dep.positions[arr[:, 0]] - dep.positions[arr[:, 1]], axis=1)
        pair_energy = float(np.sum(lengths**params.nu))
    metrics = {
        "energy": pair_energy,
        "latency": sched.makespan,
        "messages": n - 1,
    }
    return sched, metrics
