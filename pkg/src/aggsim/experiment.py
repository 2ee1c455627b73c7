"""Experiment configuration, Monte Carlo execution with reproducible per-trial
seeds, scaling-exponent regression and result persistence.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .baselines import mst_policy, raw_forwarding_policy
from .cliques import build_clq_policy, make_function_spec
from .errors import InfeasibleBudgetError, InvalidParameterError
from .geometry import EnergyParams, ceil_log2, place_uniform
from .scheduling import schedule_energy, schedule_plan, schedule_tree, validate_schedule, verify_aggregate
from .tradeoff import build_agg_plan, compute_weights
from .trees import build_bisection_tree

__all__ = [
    "POLICIES",
    "ExperimentConfig",
    "ResultRow",
    "RESULT_COLUMNS",
    "trial_seed",
    "resolve_delta",
    "run_trial",
    "run_experiment",
    "fit_scaling_exponent",
    "bootstrap_mean_ci",
    "write_results",
    "read_results",
]

POLICIES = ("alg2", "pi_agg", "pi_clq", "mst", "raw")

# Fixed CSV column order; everything round-trips losslessly.
RESULT_COLUMNS = (
    "policy",
    "n",
    "d",
    "nu",
    "delta",
    "seed",
    "energy",
    "latency_slots",
    "latency_bound",
    "violations",
    "verified",
    "repairs",
    "status",
    "reason",
    "wall_time",
)


@dataclass(frozen=True)
class ResultRow:
    policy: str
    n: int
    d: int
    nu: float
    delta: int
    seed: int
    energy: float
    latency_slots: int
    latency_bound: int
    violations: int
    verified: int
    repairs: int
    status: str = "ok"
    reason: str = ""
    wall_time: float = 0.0


@dataclass
class ExperimentConfig:
    """Sweep definition: the cross product of n, nu and delta values, each
    point run for every policy with ``trials`` seeded repetitions."""

    n_list: list
    d: int = 2
    nu_list: list = field(default_factory=lambda: [2.0])
    delta_list: list = field(default_factory=lambda: [0])
    policies: list = field(default_factory=lambda: ["alg2"])
    function: str = "sum"
    trials: int = 1
    base_seed: int = 0
    path_mode: str = "heuristic"
    output: str = "results.csv"
    output_format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if not self.n_list or not self.nu_list or not self.delta_list or not self.policies:
            raise InvalidParameterError("n_list, nu_list, delta_list, policies must be nonempty")
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        for p in self.policies:
            if p not in POLICIES:
                raise InvalidParameterError(f"unknown policy {p!r}; choose from {POLICIES}")
        if self.path_mode not in ("exact", "heuristic"):
            raise InvalidParameterError(f"unknown path mode {self.path_mode!r}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise InvalidParameterError(f"config {path} must be a mapping")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)


def resolve_delta(spec, n: int) -> int:
    """Delta entries are plain numbers or strings like "n^0.5" (rounded)."""
    if isinstance(spec, str):
        text = spec.strip().lower()
        if text.startswith("n^"):
            return int(round(n ** float(text[2:])))
        return int(round(float(text)))
    return int(spec)


def trial_seed(base_seed: int, point_index: int, trial_index: int) -> int:
    """Counter-based seed mixing so trials reproduce independently of
    execution order or worker count."""
    ss = np.random.SeedSequence([int(base_seed), int(point_index), int(trial_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def run_trial(
    policy: str,
    n: int,
    d: int,
    nu: float,
    delta: int,
    seed: int,
    function: str = "sum",
    path_mode: str = "heuristic",
) -> ResultRow:
    """Place, build, schedule, validate, verify and measure one instance."""
    if policy not in POLICIES:
        raise InvalidParameterError(f"unknown policy {policy!r}")
    t0 = time.perf_counter()
    dep = place_uniform(n, d, seed)
    params = EnergyParams(nu)
    fspec = None
    repairs = 0

    if policy == "alg2":
        tree = build_bisection_tree(dep)
        sched = schedule_tree(tree)
        bound = ceil_log2(n)
    elif policy == "pi_agg":
        if n >= 2:
            ws = compute_weights(n, d, params, delta)
            plan = build_agg_plan(dep, ws, path_mode=path_mode)
            sched = schedule_plan(plan)
            repairs = plan.repair_count
        else:
            sched = schedule_plan(build_agg_plan(dep, compute_weights(2, d, params, 0)))
        bound = ceil_log2(n) + delta + repairs
    elif policy == "pi_clq":
        fspec = make_function_spec(dep, function)
        try:
            sched, plan = build_clq_policy(dep, fspec, delta, params, path_mode=path_mode)
        except InfeasibleBudgetError as exc:
            return ResultRow(
                policy=policy,
                n=n,
                d=d,
                nu=nu,
                delta=delta,
                seed=seed,
                energy=float("nan"),
                latency_slots=0,
                latency_bound=0,
                violations=0,
                verified=0,
                repairs=0,
                status="infeasible",
                reason=str(exc),
                wall_time=time.perf_counter() - t0,
            )
        repairs = plan.repair_count
        bound = ceil_log2(n) + delta + repairs
    elif policy == "mst":
        sched, metrics = mst_policy(dep, params)
        bound = metrics["latency"]
    else:  # raw
        sched, metrics = raw_forwarding_policy(dep, params)
        bound = sched.num_transmissions  # fully serial upper bound

    report = validate_schedule(sched, dep)
    verified = verify_aggregate(sched, fspec, dep.root).passed
    return ResultRow(
        policy=policy,
        n=n,
        d=d,
        nu=nu,
        delta=delta,
        seed=seed,
        energy=schedule_energy(sched, dep, params),
        latency_slots=sched.makespan,
        latency_bound=bound,
        violations=len(report.violations),
        verified=int(verified),
        repairs=repairs,
        wall_time=time.perf_counter() - t0,
    )


def _run_point(args):
    cfg_dict, point_index, n, nu, delta_spec, trial = args
    delta = resolve_delta(delta_spec, n)
    seed = trial_seed(cfg_dict["base_seed"], point_index, trial)
    rows = []
    for policy in cfg_dict["policies"]:
        rows.append(
            run_trial(
                policy,
                n,
                cfg_dict["d"],
                nu,
                delta,
                seed,
                function=cfg_dict["function"],
                path_mode=cfg_dict["path_mode"],
            )
        )
    return rows


def run_experiment(config: ExperimentConfig, progress=None) -> list:
    """Run the full sweep; every policy sees the same deployment per trial.

    Work items are (point, trial) pairs; results come back in point order
    regardless of worker scheduling, and partial results are flushed to the
    output file as they arrive.
    """
    workers = int(os.environ.get("AGGSIM_WORKERS", config.workers))
    out_path = _resolve_output(config.output)
    points = list(itertools.product(config.n_list, config.nu_list, config.delta_list))
    cfg_dict = {
        "base_seed": config.base_seed,
        "policies": list(config.policies),
        "d": config.d,
        "function": config.function,
        "path_mode": config.path_mode,
    }
    items = [
        (cfg_dict, pi, n, nu, dspec, trial)
        for pi, (n, nu, dspec) in enumerate(points)
        for trial in range(config.trials)
    ]

    rows = []
    sink = _ResultSink(out_path, config.output_format)
    try:
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=workers) as pool:
                for batch in pool.map(_run_point, items, chunksize=4):
                    rows.extend(batch)
                    sink.append(batch)
                    if progress:
                        progress(len(rows))
        else:
            for item in items:
                batch = _run_point(item)
                rows.extend(batch)
                sink.append(batch)
                if progress:
                    progress(len(rows))
    finally:
        sink.close()
    return rows


def _resolve_output(path: str) -> str:
    override = os.environ.get("AGGSIM_OUTPUT_DIR")
    if override:
        return os.path.join(override, os.path.basename(path))
    return path


class _ResultSink:
    """Serialized, incremental writer so partial sweeps are never lost."""

    def __init__(self, path, output_format: str):
        self.path = path
        self.format = output_format
        self.rows = []
        if output_format == "csv":
            os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
            self.fh = open(path, "w", newline="")
            self.writer = csv.writer(self.fh)
            self.writer.writerow(RESULT_COLUMNS)
        elif output_format == "json":
            self.fh = None
        else:
            raise InvalidParameterError(f"unknown output format {output_format!r}")

    def append(self, batch):
        self.rows.extend(batch)
        if self.format == "csv":
            for row in batch:
                self.writer.writerow(_row_to_record(row))
            self.fh.flush()

    def close(self):
        if self.format == "csv":
            self.fh.close()
        else:
            write_results(self.rows, self.path, "json")


def _row_to_record(row: ResultRow):
    return [
        row.policy,
        row.n,
        row.d,
        "%.17g" % row.nu,
        row.delta,
        row.seed,
        "%.17g" % row.energy,
        row.latency_slots,
        row.latency_bound,
        row.violations,
        row.verified,
        row.repairs,
        row.status,
        row.reason,
        "%.6f" % row.wall_time,
    ]


def write_results(rows, path, output_format: str = "csv") -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if output_format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(RESULT_COLUMNS)
            for row in rows:
                writer.writerow(_row_to_record(row))
    elif output_format == "json":
        payload = [
            {col: getattr(row, col) for col in RESULT_COLUMNS} for row in rows
        ]
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    else:
        raise InvalidParameterError(f"unknown output format {output_format!r}")


def read_results(path) -> list:
    rows = []
    if str(path).endswith(".json"):
        with open(path) as fh:
            for rec in json.load(fh):
                rows.append(ResultRow(**rec))
        return rows
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                ResultRow(
                    policy=rec["policy"],
                    n=int(rec["n"]),
                    d=int(rec["d"]),
                    nu=float(rec["nu"]),
                    delta=int(rec["delta"]),
                    seed=int(rec["seed"]),
                    energy=float(rec["energy"]),
                    latency_slots=int(rec["latency_slots"]),
                    latency_bound=int(rec["latency_bound"]),
                    violations=int(rec["violations"]),
                    verified=int(rec["verified"]),
                    repairs=int(rec["repairs"]),
                    status=rec["status"],
                    reason=rec["reason"],
                    wall_time=float(rec["wall_time"]),
                )
            )
    return rows


def fit_scaling_exponent(points) -> tuple:
    """OLS fit of log(y) on log(x); returns (slope, intercept, r_squared)."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) < 3:
        raise InvalidParameterError("need at least 3 points for a slope fit")
    if any(x <= 0 or y <= 0 for x, y in pts):
        raise InvalidParameterError("log-log fit needs strictly positive values")
    lx = np.log(np.array([p[0] for p in pts]))
    ly = np.log(np.array([p[1] for p in pts]))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def bootstrap_mean_ci(values, n_boot: int = 1000, seed: int = 0, level: float = 0.95):
    """Percentile bootstrap interval for the mean of a sample."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise InvalidParameterError("empty sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(n_boot, arr.size))
    means = arr[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(arr.mean()), float(lo), float(hi)
