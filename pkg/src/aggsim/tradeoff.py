"""Latency-energy tradeoff policy: closed-form relay budgets per construction
level, hop-bounded least-energy path search (exact DP and the straight-line
subdivision heuristic), and assembly of the leveled aggregation plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .geometry import (
    Deployment,
    EnergyParams,
    Region,
    _bisect_core,
    ceil_log2,
    enclosing_region,
)

__all__ = [
    "WeightSchedule",
    "PlanPath",
    "AggregationPlan",
    "compute_weights",
    "hop_bounded_path_exact",
    "hop_bounded_path_heuristic",
    "build_agg_plan",
    "save_plan",
]

# Exact DP costs O(w * m^2) for a region of m candidates; above this m*w
# product a path search falls back to the subdivision heuristic.
DEFAULT_DP_CAP = 20_000


@dataclass(frozen=True)
class WeightSchedule:
    """Relay budgets w_0..w_{K-1}, one per construction level.

    Level 0 is the coarsest bisection (longest links), so it receives the
    largest share of the extra-latency budget when relaying pays off.
    """

    n: int
    d: int
    nu: float
    delta: float
    zeta: float
    w: tuple

    @property
    def K(self) -> int:
        return len(self.w)

    @property
    def total(self) -> int:
        return sum(self.w)


def compute_weights(n: int, d: int, params: EnergyParams, delta) -> WeightSchedule:
    """Split an extra-latency budget across construction levels.

    nu > d: geometrically decaying budgets, normalized so they sum to at most
    delta.  nu == d: a constant per-level budget floor(delta / K).  nu < d:
    relaying cannot beat direct links at any scale, all budgets are zero.
    """
    if n < 2:
        raise InvalidParameterError("weight schedules need n >= 2")
    if delta < 0:
        raise InvalidParameterError(f"latency budget must be >= 0, got {delta}")
    nu = params.nu
    K = ceil_log2(n)
    if nu > d:
        zeta = 1.0 - 2.0 ** (1.0 / nu - 1.0 / d)
        w = tuple(int(math.floor(zeta * delta * 2.0 ** (k * (1.0 / nu - 1.0 / d)))) for k in range(K))
    elif nu == d:
        zeta = 1.0 / K
        w = (int(math.floor(delta / K)),) * K
    else:
        zeta = 0.0
        w = (0,) * K
    if sum(w) > delta:
        raise AssertionError("weight normalization failed to respect the budget")
    return WeightSchedule(n=n, d=d, nu=nu, delta=delta, zeta=zeta, w=w)


def _node_array(candidates, u: int, v: int) -> np.ndarray:
    ids = set(int(x) for x in candidates)
    ids.add(int(u))
    ids.add(int(v))
    return np.asarray(sorted(ids), dtype=np.int64)


def hop_bounded_path_exact(
    dep: Deployment,
    candidates,
    u: int,
    v: int,
    max_intermediate: int,
    params: EnergyParams,
) -> list:
    """Least-energy u-v path using at most max_intermediate relay nodes.

    Hop-indexed dynamic programming over the complete geometric graph on the
    candidate set (Bellman-Ford limited to max_intermediate + 1 edges).  Ties
    prefer fewer hops, then smaller node ids.
    """
    if u == v:
        raise InvalidParameterError("endpoints must differ")
    if max_intermediate < 0:
        raise InvalidParameterError("relay budget must be >= 0")
    ids = _node_array(candidates, u, v)
    iu = int(np.searchsorted(ids, u))
    iv = int(np.searchsorted(ids, v))
    pts = dep.positions[ids]
    m = ids.size
    diff = pts[:, None, :] - pts[None, :, :]
    weight = np.sqrt((diff**2).sum(axis=2)) ** params.nu
    np.fill_diagonal(weight, np.inf)

    max_hops = max_intermediate + 1
    best = np.full(m, np.inf)
    best[iu] = 0.0
    layers = [best]
    parents = []
    for _ in range(max_hops):
        cand = layers[-1][:, None] + weight
        nxt = cand.min(axis=0)
        parents.append(cand.argmin(axis=0))  # first minimizer = smallest id
        layers.append(nxt)

    best_cost = np.inf
    best_h = None
    for h in range(1, max_hops + 1):
        c = layers[h][iv]
        if c < best_cost:
            best_cost = c
            best_h = h
    if best_h is None or not np.isfinite(best_cost):
        raise InvalidParameterError("no feasible path")
    path = [iv]
    h = best_h
    node = iv
    while h > 0:
        node = int(parents[h - 1][node])
        path.append(node)
        h -= 1
    path.reverse()
    return [int(ids[i]) for i in path]


def hop_bounded_path_heuristic(
    dep: Deployment,
    candidates,
    u: int,
    v: int,
    max_intermediate: int,
    params: EnergyParams,
) -> list:
    """Relay path from equally spaced subdivision points snapped to nodes.

    Subdivides the u-v segment, snaps each subdivision point to its nearest
    candidate, then strips loops and repeats.  Never beats the exact DP but
    runs in O(s * m).
    """
    if u == v:
        raise InvalidParameterError("endpoints must differ")
    if max_intermediate < 0:
        raise InvalidParameterError("relay budget must be >= 0")
    pu = dep.positions[u]
    pv = dep.positions[v]
    dist = float(np.linalg.norm(pv - pu))
    if dist >= max_intermediate:
        s = max_intermediate
    else:
        s = max(int(math.ceil(dist)) - 1, 0)
    s = min(s, max_intermediate)
    if s == 0:
        return [int(u), int(v)]
    ids = _node_array(candidates, u, v)
    pts = dep.positions[ids]
    fracs = np.arange(1, s + 1, dtype=float) / (s + 1)
    targets = pu[None, :] + fracs[:, None] * (pv - pu)[None, :]
    d2 = ((targets[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    snapped = [int(ids[int(np.argmin(row))]) for row in d2]  # argmin: smallest id on ties

    seq = [int(u), *snapped, int(v)]
    out = []
    index = {}
    for node in seq:
        if node in index:
            # close the loop: drop everything after the first occurrence
            keep = index[node] + 1
            for dropped in out[keep:]:
                del index[dropped]
            out = out[:keep]
        else:
            index[node] = len(out)
            out.append(node)
    return out


@dataclass(frozen=True)
class PlanPath:
    """One leveled connection: node sequence from child endpoint to parent."""

    level: int
    parent: int
    child: int
    nodes: tuple

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class AggregationPlan:
    """Leveled hop-bounded paths plus direct repair attachments.

    ``levels[k]`` holds the paths created at construction level k; paths in
    one level touch pairwise disjoint node sets.  ``repairs`` are (node,
    target) attachments for nodes the level construction left unconnected.
    """

    n: int
    root: int
    weights: WeightSchedule
    levels: tuple
    repairs: tuple

    @property
    def K(self) -> int:
        return self.weights.K

    @property
    def repair_count(self) -> int:
        return len(self.repairs)

    def links(self) -> list:
        """Directed link multiset used by the policy (hop per transmission)."""
        out = []
        for level in self.levels:
            for p in level:
                out.extend(zip(p.nodes[:-1], p.nodes[1:]))
        out.extend(self.repairs)
        return out

    def energy(self, dep: Deployment, params: EnergyParams) -> float:
        links = self.links()
        if not links:
            return 0.0
        pairs = sorted((a, b) if a < b else (b, a) for a, b in links)
        pairs = np.asarray(pairs, dtype=np.int64)
        hop = np.linalg.norm(
            dep.positions[pairs[:, 0]] - dep.positions[pairs[:, 1]], axis=1
        )
        return float(np.sum(hop**params.nu))


def build_agg_plan(
    dep: Deployment,
    ws: WeightSchedule,
    path_mode: str = "exact",
    dp_cap: int = DEFAULT_DP_CAP,
) -> AggregationPlan:
    """Run the leveled bisection construction with hop-bounded child paths.

    Per level k every active node splits its region, picks the nearest
    not-yet-used node of the far half as a child endpoint, and connects to it
    with a path of at most w_k relays drawn from the pre-split region (which
    keeps same-level paths node-disjoint).  Endpoints and relays become
    ineligible as future endpoints; relays may relay again later.  Nodes left
    over at the end are attached directly to the nearest used node in their
    region and counted as repairs.
    """
    if path_mode not in ("exact", "heuristic"):
        raise InvalidParameterError(f"unknown path mode {path_mode!r}")
    n = dep.n
    root = dep.root
    pos = dep.positions
    if n == 1:
        ws1 = WeightSchedule(n=1, d=dep.d, nu=ws.nu, delta=ws.delta, zeta=0.0, w=())
        return AggregationPlan(n=1, root=root, weights=ws1, levels=(), repairs=())
    if ws.K != ceil_log2(n):
        raise InvalidParameterError("weight schedule was computed for a different n")

    params = EnergyParams(ws.nu)
    regions: dict[int, Region] = {root: enclosing_region(dep)}
    members: dict[int, np.ndarray] = {root: np.arange(n, dtype=np.int64)}
    owner = np.zeros(n, dtype=np.int64)
    owner[:] = root
    active = [root]
    used = np.zeros(n, dtype=bool)  # endpoints and relays, never re-eligible
    used[root] = True
    stalled: set[int] = set()
    levels = []

    for k in range(ws.K):
        w_k = ws.w[k]
        level_paths = []
        for i in list(active):
            if i in stalled:
                continue
            mem = members[i]
            if mem.size < 2:
                continue
            b1, b2, mem1, mem2 = _bisect_core(regions[i], mem, pos[mem], i)
            elig = mem2[~used[mem2]]
            if elig.size == 0:
                # every far-half node already served as endpoint or relay;
                # this can never change, so stop splitting here
                stalled.add(i)
                continue
            d2 = ((pos[elig] - pos[i]) ** 2).sum(axis=1)
            j = int(elig[np.lexsort((elig, d2))[0]])
            if w_k == 0:
                path = [j, i]
            else:
                mode = path_mode
                # the m*w cap bounds DP time; the flat m cap bounds the m^2
                # distance matrix
                if mode == "exact" and (mem.size * w_k > dp_cap or mem.size > 2000):
                    mode = "heuristic"
                if mode == "exact":
                    path = hop_bounded_path_exact(dep, mem, j, i, w_k, params)
                else:
                    path = hop_bounded_path_heuristic(dep, mem, j, i, w_k, params)
            level_paths.append(
                PlanPath(level=k, parent=i, child=j, nodes=tuple(int(x) for x in path))
            )
            used[list(path)] = True
            active.append(j)
            regions[i], members[i] = b1, mem1
            regions[j], members[j] = b2, mem2
            owner[mem2] = j
        levels.append(tuple(level_paths))

    repairs = []
    for y in np.nonzero(~used)[0]:
        y = int(y)
        mem = members[int(owner[y])]
        covered = mem[used[mem]]
        if covered.size == 0:
            covered = np.asarray(active, dtype=np.int64)
        d2 = ((pos[covered] - pos[y]) ** 2).sum(axis=1)
        target = int(covered[np.lexsort((covered, d2))[0]])
        repairs.append((y, target))

    return AggregationPlan(
        n=n,
        root=root,
        weights=ws,
        levels=tuple(levels),
        repairs=tuple(repairs),
    )


def save_plan(plan: AggregationPlan, path) -> None:
    """Text export: one "level parent child node..nodes" line per path, then
    one "repair node target" line per repair attachment."""
    ws = plan.weights
    with open(path, "w") as fh:
        fh.write(f"# aggsim plan v1\n# n={plan.n} root={plan.root} K={plan.K}\n")
        fh.write(f"# d={ws.d} nu={ws.nu!r} delta={ws.delta!r} zeta={ws.zeta!r}\n")
        fh.write(f"# weights={','.join(str(w) for w in ws.w)}\n")
        for level in plan.levels:
            for p in level:
                seq = " ".join(str(x) for x in p.nodes)
                fh.write(f"{p.level} {p.parent} {p.child} {seq}\n")
        for y, target in plan.repairs:
            fh.write(f"repair {y} {target}\n")


def load_plan(path) -> AggregationPlan:
    header = {}
    paths = []
    repairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
                continue
            parts = line.split()
            if parts[0] == "repair":
                repairs.append((int(parts[1]), int(parts[2])))
                continue
            level, parent, child = int(parts[0]), int(parts[1]), int(parts[2])
            nodes = tuple(int(x) for x in parts[3:])
            paths.append(PlanPath(level=level, parent=parent, child=child, nodes=nodes))
    w = tuple(int(x) for x in header["weights"].split(",")) if header.get("weights") else ()
    ws = WeightSchedule(
        n=int(header["n"]),
        d=int(header.get("d", 2)),
        nu=float(header.get("nu", 2.0)),
        delta=float(header.get("delta", sum(w))),
        zeta=float(header.get("zeta", 0.0)),
        w=w,
    )
    levels = [[] for _ in range(len(w))]
    for p in paths:
        levels[p.level].append(p)
    return AggregationPlan(
        n=int(header["n"]),
        root=int(header["root"]),
        weights=ws,
        levels=tuple(tuple(lv) for lv in levels),
        repairs=tuple(repairs),
    )
