"""Node placement, regions, link energies and the node-balanced bisection primitive.

Everything here is a pure function of its inputs; Deployment and Region values
are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, InvalidPathError

__all__ = [
    "Deployment",
    "Region",
    "EnergyParams",
    "place_uniform",
    "edge_energy",
    "path_energy",
    "region_bisect",
    "enclosing_region",
    "save_deployment",
    "load_deployment",
]

# Exact-precision float formatting; %.17g round-trips IEEE doubles.
_FLT = "%.17g"


@dataclass(frozen=True)
class EnergyParams:
    """Per-link energy model: a link of length R costs R**nu."""

    nu: float = 2.0

    def __post_init__(self):
        if self.nu < 1.0:
            raise InvalidParameterError(f"path-loss exponent must be >= 1, got {self.nu}")


@dataclass(frozen=True)
class Region:
    """Axis-aligned box given by per-axis [lo, hi] intervals."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise InvalidParameterError("lo/hi dimension mismatch")
        for a, b in zip(self.lo, self.hi):
            if a > b:
                raise InvalidParameterError(f"empty interval [{a}, {b}]")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def extents(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float) - np.asarray(self.lo, dtype=float)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> bool:
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lo) - tol
        hi = np.asarray(self.hi) + tol
        return bool(np.all(pts >= lo) and np.all(pts <= hi))

    def split(self, axis: int, threshold: float) -> tuple["Region", "Region"]:
        """Two boxes sharing the hyperplane x[axis] == threshold."""
        lo, hi = list(self.lo), list(self.hi)
        lo_hi = hi.copy()
        lo_hi[axis] = threshold
        hi_lo = lo.copy()
        hi_lo[axis] = threshold
        return (
            Region(tuple(lo), tuple(lo_hi)),
            Region(tuple(hi_lo), tuple(hi)),
        )


class Deployment:
    """An instance of randomly placed nodes in the box [0, n**(1/d)]**d.

    Node ids are 0..n-1 and the root is node 0 for generated instances.
    Positions are float64 and never mutated after construction.
    """

    __slots__ = ("n", "d", "seed", "root", "positions")

    def __init__(self, positions: np.ndarray, seed: int | None = None, root: int = 0):
        pos = np.array(positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise InvalidParameterError("positions must be a non-empty (n, d) array")
        pos.setflags(write=False)
        self.positions = pos
        self.n = int(pos.shape[0])
        self.d = int(pos.shape[1])
        self.seed = seed
        if not (0 <= root < self.n):
            raise InvalidParameterError(f"root {root} outside 0..{self.n - 1}")
        self.root = int(root)

    @property
    def side(self) -> float:
        """Side length of the nominal placement box."""
        return self.n ** (1.0 / self.d)

    def distance(self, u: int, v: int) -> float:
        return float(np.linalg.norm(self.positions[u] - self.positions[v]))

    def __repr__(self):
        return f"Deployment(n={self.n}, d={self.d}, seed={self.seed}, root={self.root})"


def place_uniform(n: int, d: int, seed: int) -> Deployment:
    """Place n i.i.d. uniform nodes in [0, n**(1/d)]**d, deterministically in seed."""
    if n < 1 or d < 1:
        raise InvalidParameterError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    side = n ** (1.0 / d)
    positions = rng.uniform(0.0, side, size=(n, d))
    return Deployment(positions, seed=seed, root=0)


def enclosing_region(dep: Deployment) -> Region:
    """Nominal placement box, widened if a loaded instance spills outside it."""
    lo = np.minimum(dep.positions.min(axis=0), 0.0)
    hi = np.maximum(dep.positions.max(axis=0), dep.side)
    return Region(tuple(lo.tolist()), tuple(hi.tolist()))


def edge_energy(p, q, params: EnergyParams) -> float:
    """Energy of a direct transmission between points p and q: ||p - q||**nu."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidParameterError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.linalg.norm(p - q) ** params.nu)


def path_energy(path: Sequence[int], dep: Deployment, params: EnergyParams) -> float:
    """Sum of hop energies along a node-id sequence."""
    if len(path) < 2:
        raise InvalidPathError("path needs at least two nodes")
    ids = np.asarray(path, dtype=int)
    if np.any(ids[1:] == ids[:-1]):
        raise InvalidPathError("path repeats a node on consecutive hops")
    pts = dep.positions[ids]
    hop = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
    return float(np.sum(hop**params.nu))


def _pick_split_axis(coords: np.ndarray, region: Region) -> int:
    """Largest-extent axis whose member coordinates are not all identical.

    Returns -1 when every axis is degenerate (all members coincide).
    """
    extents = region.extents()
    order = sorted(range(region.dim), key=lambda a: (-extents[a], a))
    for axis in order:
        col = coords[:, axis]
        if col.max() > col.min():
            return axis
    return -1


def _bisect_core(region: Region, ids: np.ndarray, pts: np.ndarray, ref: int):
    """Unvalidated bisection on a sorted id array with matching positions."""
    m = ids.size
    axis = _pick_split_axis(pts, region)
    if axis < 0:
        # All members coincide: order by id and cut at the shared coordinate.
        axis = 0
        order = np.arange(m)
        coords_sorted = pts[order, axis]
    else:
        coords = pts[:, axis]
        order = np.lexsort((ids, coords))
        coords_sorted = coords[order]

    ids_sorted = ids[order]
    rho = int(np.nonzero(ids_sorted == ref)[0][0])

    h_floor = m // 2
    h_ceil = m - h_floor
    if rho < h_floor:
        h, ref_low = h_floor, True  # |members1| = floor(m/2), low side
    elif rho >= h_ceil:
        h, ref_low = h_ceil, False  # |members1| = floor(m/2), high side
    else:
        h, ref_low = h_ceil, True  # middle order statistic: |members1| = ceil(m/2)

    threshold = 0.5 * (coords_sorted[h - 1] + coords_sorted[h])
    low_region, high_region = region.split(axis, threshold)
    low_ids = np.sort(ids_sorted[:h])
    high_ids = np.sort(ids_sorted[h:])
    if ref_low:
        return low_region, high_region, low_ids, high_ids
    return high_region, low_region, high_ids, low_ids


def region_bisect(region: Region, members: Iterable[int], ref: int, dep: Deployment):
    """Split a region into two boxes with near-equal member counts.

    The split runs along the largest-extent axis, with the threshold at the
    midpoint between the two adjacent member order statistics that realize the
    count split.  The reference node always lands in the first returned half;
    the half sizes are floor(m/2)/ceil(m/2) with the floor-sized half preferred
    for the reference's side.  Returns (B1, B2, members1, members2) where the
    member arrays are sorted node ids, members1 containing ``ref``.
    """
    ids = np.asarray(sorted(set(int(x) for x in members)), dtype=np.int64)
    m = ids.size
    if m < 2:
        raise InvalidParameterError(f"cannot bisect {m} member(s)")
    if ref not in ids:
        raise InvalidParameterError(f"reference node {ref} is not a member")
    pts = dep.positions[ids]
    if not region.contains(pts):
        raise InvalidParameterError("member positions fall outside the region")
    return _bisect_core(region, ids, pts, ref)


def save_deployment(dep: Deployment, path) -> None:
    """Write a deployment as text: header then one "id x1 .. xd" line per node."""
    with open(path, "w") as fh:
        fh.write("# aggsim deployment v1\n")
        fh.write(f"# n={dep.n} d={dep.d} seed={dep.seed} root={dep.root}\n")
        for i in range(dep.n):
            coords = " ".join(_FLT % x for x in dep.positions[i])
            fh.write(f"{i} {coords}\n")


def load_deployment(path) -> Deployment:
    """Read a deployment written by save_deployment; round-trip is lossless."""
    header = {}
    rows = {}
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
            rows[int(parts[0])] = [float(x) for x in parts[1:]]
    if not rows:
        raise InvalidParameterError(f"no node records in {path}")
    n = len(rows)
    if sorted(rows) != list(range(n)):
        raise InvalidParameterError("node ids must be exactly 0..n-1")
    positions = np.array([rows[i] for i in range(n)], dtype=np.float64)
    seed = header.get("seed")
    seed = None if seed in (None, "None") else int(seed)
    root = int(header.get("root", 0))
    if "n" in header and int(header["n"]) != n:
        raise InvalidParameterError(f"header n={header['n']} but file has {n} records")
    if "d" in header and int(header["d"]) != positions.shape[1]:
        raise InvalidParameterError("header d does not match record width")
    return Deployment(positions, seed=seed, root=root)


def ceil_log2(n: int) -> int:
    """Smallest L with 2**L >= n (0 for n == 1)."""
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    return (int(n) - 1).bit_length()
