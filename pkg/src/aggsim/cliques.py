"""Two-stage policy for clique-decomposable functions: color-scheduled data
forwarding into per-clique processors, then the leveled aggregation policy
carrying the clique values to the root.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import InfeasibleBudgetError, InvalidParameterError
from .geometry import Deployment, EnergyParams
from .graphs import (
    CliqueSet,
    EdgeColoring,
    UndirectedGraph,
    build_complete,
    build_knng,
    build_rgg,
    max_degree,
    maximal_cliques,
    proper_edge_coloring,
)
from .scheduling import Schedule, Transmission, schedule_plan
from .tradeoff import build_agg_plan, compute_weights

__all__ = [
    "FunctionSpec",
    "make_function_spec",
    "parse_function_kind",
    "assign_processors",
    "build_forwarding_stage",
    "build_clq_policy",
]


@dataclass(frozen=True)
class FunctionSpec:
    """Target function described by its dependency graph and maximal cliques.

    kind "sum" is the edgeless special case: every clique is a singleton and
    every node processes itself.
    """

    kind: str  # "sum" | "knng" | "rgg" | "complete"
    param: float | None
    graph: UndirectedGraph
    cliques: CliqueSet
    processor: dict  # clique id -> node id

    @property
    def is_sum(self) -> bool:
        return not self.graph.edges


def parse_function_kind(text: str):
    """Parse CLI-style function descriptors: sum | knng:k | rgg:rho | complete."""
    text = text.strip().lower()
    if text == "sum":
        return "sum", None
    if text == "complete":
        return "complete", None
    if ":" in text:
        kind, raw = text.split(":", 1)
        if kind == "knng":
            return "knng", int(raw)
        if kind == "rgg":
            return "rgg", float(raw)
    raise InvalidParameterError(f"unknown function kind {text!r}")


def assign_processors(cliques: CliqueSet) -> dict:
    """Each clique is processed by its smallest-id member."""
    processor = {}
    for cid, clique in enumerate(cliques):
        if not clique:
            raise InvalidParameterError(f"clique {cid} is empty")
        processor[cid] = min(clique)
    return processor


def make_function_spec(dep: Deployment, descriptor: str) -> FunctionSpec:
    kind, param = parse_function_kind(descriptor)
    if kind == "sum":
        graph = UndirectedGraph(dep.n, [])
    elif kind == "knng":
        graph = build_knng(dep, param)
    elif kind == "rgg":
        graph = build_rgg(dep, param)
    else:
        graph = build_complete(dep.n)
    cliques = maximal_cliques(graph)
    return FunctionSpec(
        kind=kind,
        param=param,
        graph=graph,
        cliques=cliques,
        processor=assign_processors(cliques),
    )


def forwarding_links(spec: FunctionSpec) -> list:
    """Directed (member, processor) links, each dependency edge used once."""
    links = set()
    for cid, clique in enumerate(spec.cliques):
        proc = spec.processor[cid]
        for j in clique:
            if j != proc:
                links.add((j, proc))
    return sorted(links)


def build_forwarding_stage(spec: FunctionSpec, coloring: EdgeColoring):
    """Slots for the data-forwarding stage: slot t carries the links colored t.

    The coloring must be proper on the forwarding link set; the stage then
    needs at most max_degree(F) + 1 slots.
    """
    links = forwarding_links(spec)
    if not links:
        return []
    undirected = {(min(a, b), max(a, b)) for a, b in links}
    support = UndirectedGraph(spec.graph.n, undirected)
    if not coloring.is_proper(support):
        raise InvalidParameterError("coloring is not proper on the forwarding links")
    by_color = {}
    for j, proc in links:
        c = coloring.color[(min(j, proc), max(j, proc))]
        by_color.setdefault(c, []).append(Transmission(j, proc))
    slots = [by_color[c] for c in sorted(by_color)]
    return slots


def build_clq_policy(
    dep: Deployment,
    spec: FunctionSpec,
    delta: int,
    params: EnergyParams,
    path_mode: str = "exact",
):
    """Two-stage schedule: forwarding into processors, then aggregation of the
    clique values under the leftover latency budget.

    Needs delta >= max_degree(dependency graph) + 1 whenever the graph has
    edges; the aggregation stage runs with the remainder.  Returns the
    combined Schedule and the aggregation plan (for repair accounting).
    """
    dg_delta = max_degree(spec.graph)
    reserved = 0 if not spec.graph.edges else dg_delta + 1
    if delta < reserved:
        raise InfeasibleBudgetError(delta, reserved)

    if spec.graph.edges:
        support = {(min(a, b), max(a, b)) for a, b in forwarding_links(spec)}
        coloring = proper_edge_coloring(UndirectedGraph(dep.n, support))
        fwd_slots = build_forwarding_stage(spec, coloring)
    else:
        fwd_slots = []

    if dep.n >= 2:
        ws = compute_weights(dep.n, dep.d, params, delta - reserved)
    else:
        ws = compute_weights(2, dep.d, params, 0)  # ignored: the plan is empty
    plan = build_agg_plan(dep, ws, path_mode=path_mode)
    agg = list(schedule_plan(plan).slots) if dep.n >= 2 else []

    slots = [list(s) for s in fwd_slots] + [list(s) for s in agg]
    schedule = Schedule(
        dep.n,
        slots,
        forwarding_slots=len(fwd_slots),
        repair_slots=plan.repair_count,
    )
    return schedule, plan
