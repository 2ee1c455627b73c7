"""Slot-indexed schedules: synthesis from trees and leveled plans, validation
against the link model (half-duplex, single link per node and slot, causal
payloads), and symbolic verification that the root ends up with every
contribution exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ScheduleConflictError
from .geometry import Deployment, EnergyParams
from .trees import AggregationTree, subtree_latencies

__all__ = [
    "ContributionToken",
    "Transmission",
    "Schedule",
    "ValidationReport",
    "VerificationReport",
    "schedule_tree",
    "schedule_plan",
    "validate_schedule",
    "verify_aggregate",
    "schedule_energy",
    "save_schedule",
    "load_schedule",
]


@dataclass(frozen=True)
class ContributionToken:
    """A unit of payload: a node's measurement or a computed clique value."""

    kind: str  # "measurement" | "clique"
    origin: int

    def key(self):
        return ("m" if self.kind == "measurement" else "c", self.origin)


def _token_key(tok):
    if isinstance(tok, ContributionToken):
        return tok.key()
    return ("m", int(tok))  # bare ints are measurement tokens


@dataclass(frozen=True)
class Transmission:
    tx: int
    rx: int
    payload: tuple = None  # optional explicit tokens; None = derived by simulation


class Schedule:
    """Immutable list of slots, each a tuple of simultaneous transmissions.

    ``forwarding_slots`` marks the boundary of a two-stage schedule (0 when
    there is no forwarding stage); ``repair_slots`` counts the leading repair
    transmissions that precede the aggregation windows.
    """

    __slots__ = ("n", "slots", "forwarding_slots", "repair_slots")

    def __init__(self, n, slots, forwarding_slots=0, repair_slots=0):
        self.n = int(n)
        self.slots = tuple(tuple(s) for s in slots)
        self.forwarding_slots = int(forwarding_slots)
        self.repair_slots = int(repair_slots)

    @property
    def makespan(self) -> int:
        """Index of the last nonempty slot (1-based); 0 for an idle schedule."""
        for idx in range(len(self.slots), 0, -1):
            if self.slots[idx - 1]:
                return idx
        return 0

    def transmissions(self):
        for slot in self.slots:
            yield from slot

    @property
    def num_transmissions(self) -> int:
        return sum(len(s) for s in self.slots)

    def __repr__(self):
        return (
            f"Schedule(n={self.n}, slots={len(self.slots)}, "
            f"tx={self.num_transmissions}, fwd={self.forwarding_slots})"
        )


def schedule_tree(t: AggregationTree) -> Schedule:
    """Optimal slot assignment for a tree: children transmit in order of
    decreasing subtree latency, the heaviest one last."""
    lat = subtree_latencies(t)
    span = lat[t.root]
    slots = [[] for _ in range(span)]
    stack = [(t.root, span + 1)]
    while stack:
        v, deadline = stack.pop()
        kids = sorted(t.children[v], key=lambda c: (-lat[c], c))
        for rank, c in enumerate(kids, start=1):
            s = deadline - rank
            slots[s - 1].append(Transmission(c, v))
            stack.append((c, s))
    return Schedule(t.n, slots)


def schedule_plan(plan) -> Schedule:
    """Materialize a leveled plan: repairs first, then one window per level
    from the deepest level down, each path right-aligned in its window.

    Right alignment puts a path's final hop on the window boundary, so every
    parent endpoint holds its whole subtree before its own later transmission.
    """
    w = plan.weights.w
    K = plan.K
    lead = plan.repair_count
    widths = [1 + w[k] for k in range(K)]
    total = lead + sum(widths)
    slots = [[] for _ in range(total)]

    for r, (y, target) in enumerate(plan.repairs):
        slots[r].append(Transmission(y, target))

    # window for level k ends at lead + widths[K-1] + ... + widths[k]
    end = lead
    ends = [0] * K
    for k in range(K - 1, -1, -1):
        end += widths[k]
        ends[k] = end

    for k, level in enumerate(plan.levels):
        seen = set()
        for p in level:
            for node in p.nodes:
                if node in seen:
                    raise ScheduleConflictError(
                        f"level {k} paths share node {node}; plan invariant violated"
                    )
                seen.add(node)
            h = p.hops
            if h > widths[k]:
                raise ScheduleConflictError(
                    f"level {k} path has {h} hops but the window holds {widths[k]}"
                )
            start_slot = ends[k] - h + 1
            for step in range(h):
                tx, rx = p.nodes[step], p.nodes[step + 1]
                slots[start_slot - 1 + step].append(Transmission(tx, rx))
    return Schedule(plan.n, slots, repair_slots=lead)


@dataclass(frozen=True)
class Violation:
    kind: str
    slot: int
    node: int
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        if self.ok:
            return "ok: no violations\n"
        lines = [f"{len(self.violations)} violation(s)"]
        for v in self.violations:
            lines.append(f"{v.kind} slot={v.slot} node={v.node} {v.detail}".rstrip())
        return "\n".join(lines) + "\n"


def validate_schedule(s: Schedule, dep: Deployment | None = None) -> ValidationReport:
    """Check the link model slot by slot.

    Violations: a node transmitting and receiving in one slot (half-duplex),
    more than one transmission or reception per node per slot, self-loops,
    out-of-range ids, and payload tokens carried before the sender held them.
    """
    n = dep.n if dep is not None else s.n
    violations = []
    held = None
    for idx, slot in enumerate(s.slots, start=1):
        txs = {}
        rxs = {}
        for tr in slot:
            if tr.tx == tr.rx:
                violations.append(Violation("self-loop", idx, tr.tx))
            for node in (tr.tx, tr.rx):
                if not (0 <= node < n):
                    violations.append(Violation("bad-node", idx, node))
            txs[tr.tx] = txs.get(tr.tx, 0) + 1
            rxs[tr.rx] = rxs.get(tr.rx, 0) + 1
        for node, count in txs.items():
            if count > 1:
                violations.append(
                    Violation("multiple-tx", idx, node, f"{count} simultaneous transmissions")
                )
        for node, count in rxs.items():
            if count > 1:
                violations.append(
                    Violation("multiple-rx", idx, node, f"{count} simultaneous receptions")
                )
        for node in txs.keys() & rxs.keys():
            violations.append(Violation("half-duplex", idx, node, "transmits and receives"))

        payloads = [tr for tr in slot if tr.payload is not None]
        if payloads and held is None:
            held = [{("m", v)} for v in range(n)]
        if held is not None:
            arriving = []
            for tr in payloads:
                for tok in tr.payload:
                    key = _token_key(tok)
                    if key[0] == "m" and key not in held[tr.tx]:
                        violations.append(
                            Violation(
                                "token-causality",
                                idx,
                                tr.tx,
                                f"token {key} not held before slot {idx}",
                            )
                        )
                    arriving.append((tr.rx, key))
            for rx, key in arriving:
                held[rx].add(key)
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    mode: str
    missing: tuple = ()
    duplicated: tuple = ()
    issues: tuple = ()

    def to_text(self) -> str:
        status = "pass" if self.passed else "FAIL"
        lines = [f"{status} mode={self.mode}"]
        if self.missing:
            lines.append(f"missing: {list(self.missing)}")
        if self.duplicated:
            lines.append(f"duplicated: {list(self.duplicated)}")
        lines.extend(self.issues)
        return "\n".join(lines) + "\n"


def _mask_bits(mask: int):
    out = []
    idx = 0
    while mask:
        if mask & 1:
            out.append(idx)
        mask >>= 1
        idx += 1
    return out


def _verify_sum_flow(s: Schedule, root: int) -> VerificationReport:
    """Move-semantics token flow: a node's first transmission carries its own
    measurement, later ones forward only what arrived since."""
    n = s.n
    held = [1 << v for v in range(n)]
    for slot in s.slots:
        moves = [(tr.tx, tr.rx, held[tr.tx]) for tr in slot]
        for tx, rx, mask in moves:
            held[tx] &= ~mask
        for tx, rx, mask in moves:
            held[rx] |= mask
    full = (1 << n) - 1
    missing = _mask_bits(full & ~held[root])
    passed = not missing
    return VerificationReport(passed=passed, mode="sum", missing=tuple(missing))


def _verify_sum_payloads(s: Schedule, root: int) -> VerificationReport:
    """Hand-declared payloads: accumulate copies and check the root's final
    multiset holds every measurement exactly once."""
    from collections import Counter

    received = Counter()
    for slot in s.slots:
        for tr in slot:
            if tr.rx == root and tr.payload is not None:
                for tok in tr.payload:
                    received[_token_key(tok)] += 1
    received[("m", root)] += 1  # the root's own measurement
    missing = []
    duplicated = []
    for v in range(s.n):
        count = received.get(("m", v), 0)
        if count == 0:
            missing.append(v)
        elif count > 1:
            duplicated.append(v)
    passed = not missing and not duplicated
    return VerificationReport(
        passed=passed, mode="sum", missing=tuple(missing), duplicated=tuple(duplicated)
    )


def _verify_clique_flow(s: Schedule, fspec, root: int) -> VerificationReport:
    """Two-phase flow: measurements fan in to clique processors during the
    forwarding slots (copy semantics: each hop carries the sender's own
    measurement), processors mint one token per clique at the boundary, then
    the aggregation slots move clique tokens to the root exactly once."""
    n = s.n
    boundary = s.forwarding_slots
    meas = [1 << v for v in range(n)]
    for slot in s.slots[:boundary]:
        for tr in slot:
            meas[tr.rx] |= 1 << tr.tx

    issues = []
    cliques = list(fspec.cliques)
    held = [0] * n
    for cid, clique in enumerate(cliques):
        proc = fspec.processor[cid]
        cmask = 0
        for v in clique:
            cmask |= 1 << v
        if meas[proc] & cmask != cmask:
            lacking = _mask_bits(cmask & ~meas[proc])
            issues.append(
                f"processor {proc} of clique {cid} is missing measurements {lacking}"
            )
            continue
        held[proc] |= 1 << cid

    for slot in s.slots[boundary:]:
        moves = [(tr.tx, tr.rx, held[tr.tx]) for tr in slot]
        for tx, rx, mask in moves:
            held[tx] &= ~mask
        for tx, rx, mask in moves:
            held[rx] |= mask

    full = (1 << len(cliques)) - 1
    missing = _mask_bits(full & ~held[root])
    passed = not missing and not issues
    return VerificationReport(
        passed=passed, mode="clique", missing=tuple(missing), issues=tuple(issues)
    )


def verify_aggregate(s: Schedule, fspec, root: int) -> VerificationReport:
    """Check that the schedule delivers the target function to the root.

    ``fspec`` of kind "sum" (or None) verifies measurement tokens; any other
    kind verifies clique tokens, requiring each processor to hold its members'
    measurements before the aggregation stage begins.
    """
    if fspec is None or getattr(fspec, "kind", "sum") == "sum":
        if any(tr.payload is not None for tr in s.transmissions()):
            return _verify_sum_payloads(s, root)
        return _verify_sum_flow(s, root)
    return _verify_clique_flow(s, fspec, root)


def schedule_energy(s: Schedule, dep: Deployment, params: EnergyParams) -> float:
    """Total energy of every transmission actually scheduled.

    Summed in canonical link order so the value depends only on the link
    multiset, not on slot layout.
    """
    pairs = [(tr.tx, tr.rx) if tr.tx < tr.rx else (tr.rx, tr.tx) for tr in s.transmissions()]
    if not pairs:
        return 0.0
    arr = np.asarray(sorted(pairs), dtype=np.int64)
    hop = np.linalg.norm(dep.positions[arr[:, 0]] - dep.positions[arr[:, 1]], axis=1)
    return float(np.sum(hop**params.nu))


def save_schedule(s: Schedule, path) -> None:
    """One "slot tx rx" line per transmission (payloads are not persisted)."""
    with open(path, "w") as fh:
        fh.write("# aggsim schedule v1\n")
        fh.write(
            f"# n={s.n} slots={len(s.slots)} forwarding_slots={s.forwarding_slots} "
            f"repair_slots={s.repair_slots}\n"
        )
        for idx, slot in enumerate(s.slots, start=1):
            for tr in slot:
                fh.write(f"{idx} {tr.tx} {tr.rx}\n")


def load_schedule(path) -> Schedule:
    header = {}
    rows = []
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
            slot, tx, rx = (int(x) for x in line.split())
            rows.append((slot, tx, rx))
    num_slots = int(header.get("slots", max((r[0] for r in rows), default=0)))
    n = int(header.get("n", max((max(r[1], r[2]) for r in rows), default=-1) + 1))
    slots = [[] for _ in range(num_slots)]
    for slot, tx, rx in rows:
        slots[slot - 1].append(Transmission(tx, rx))
    return Schedule(
        n,
        slots,
        forwarding_slots=int(header.get("forwarding_slots", 0)),
        repair_slots=int(header.get("repair_slots", 0)),
    )
