"""Command-line interface.

Subcommands:
    place     generate a deployment file
    graph     build a dependency graph / MST from a deployment
    schedule  build a policy schedule for a deployment
    validate  check a schedule file against the link model
    run       execute an experiment config (YAML/JSON)
    fit       log-log slope fit over a results table
    viz-data  tidy summary tables + figures from a results table

Examples:
    aggsim place --n 256 --d 2 --seed 7 --out dep.txt
    aggsim graph dep.txt --kind knng:3 --out g.txt --cliques cliques.txt
    aggsim schedule dep.txt --policy pi_agg --nu 4 --delta 8 --out sched.txt
    aggsim validate sched.txt --deployment dep.txt
    aggsim run config.yaml
    aggsim fit results.csv --x n --y energy --policy alg2
    aggsim viz-data results.csv --out-dir report/
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .baselines import mst_policy, raw_forwarding_policy
from .cliques import build_clq_policy, make_function_spec
from .errors import AggsimError
from .experiment import (
    ExperimentConfig,
    fit_scaling_exponent,
    read_results,
    run_experiment,
)
from .geometry import EnergyParams, load_deployment, place_uniform, save_deployment
from .graphs import build_knng, build_mst, build_rgg, maximal_cliques, save_cliques, save_edge_list
from .scheduling import (
    load_schedule,
    save_schedule,
    schedule_plan,
    schedule_tree,
    validate_schedule,
    verify_aggregate,
)
from .tradeoff import build_agg_plan, compute_weights, save_plan
from .trees import build_bisection_tree, save_tree


def _cmd_place(args):
    dep = place_uniform(args.n, args.d, args.seed)
    save_deployment(dep, args.out)
    print(f"wrote {args.out}: n={dep.n} d={dep.d} seed={dep.seed} root={dep.root}")
    return 0


def _cmd_graph(args):
    dep = load_deployment(args.deployment)
    kind = args.kind.strip().lower()
    if kind == "mst":
        g = build_mst(dep)
    elif kind.startswith("knng:"):
        g = build_knng(dep, int(kind.split(":", 1)[1]))
    elif kind.startswith("rgg:"):
        g = build_rgg(dep, float(kind.split(":", 1)[1]))
    else:
        raise AggsimError(f"unknown graph kind {args.kind!r} (knng:k | rgg:r | mst)")
    save_edge_list(g, args.out)
    print(f"wrote {args.out}: n={g.n} edges={len(g.edges)}")
    if args.cliques:
        cs = maximal_cliques(g)
        save_cliques(cs, args.cliques)
        print(f"wrote {args.cliques}: cliques={len(cs)}")
    return 0


def _cmd_schedule(args):
    dep = load_deployment(args.deployment)
    params = EnergyParams(args.nu)
    if args.from_tree:
        from .trees import load_tree

        sched = schedule_tree(load_tree(args.from_tree))
    elif args.from_plan:
        from .tradeoff import load_plan

        sched = schedule_plan(load_plan(args.from_plan))
    elif args.policy == "alg2":
        tree = build_bisection_tree(dep)
        sched = schedule_tree(tree)
        if args.tree:
            save_tree(tree, args.tree)
    elif args.policy == "pi_agg":
        ws = compute_weights(dep.n, dep.d, params, args.delta)
        plan = build_agg_plan(dep, ws, path_mode=args.path_mode)
        sched = schedule_plan(plan)
        if args.plan:
            save_plan(plan, args.plan)
    elif args.policy == "pi_clq":
        fspec = make_function_spec(dep, args.function)
        sched, plan = build_clq_policy(dep, fspec, args.delta, params, path_mode=args.path_mode)
        if args.plan:
            save_plan(plan, args.plan)
    elif args.policy == "mst":
        sched, _ = mst_policy(dep, params)
    elif args.policy == "raw":
        sched, _ = raw_forwarding_policy(dep, params)
    else:
        raise AggsimError(f"unknown policy {args.policy!r}")
    save_schedule(sched, args.out)
    print(
        f"wrote {args.out}: slots={len(sched.slots)} makespan={sched.makespan} "
        f"transmissions={sched.num_transmissions}"
    )
    return 0


def _cmd_validate(args):
    sched = load_schedule(args.schedule)
    dep = load_deployment(args.deployment) if args.deployment else None
    report = validate_schedule(sched, dep)
    sys.stdout.write(report.to_text())
    if args.verify and dep is not None:
        fspec = make_function_spec(dep, args.function) if args.function != "sum" else None
        vr = verify_aggregate(sched, fspec, dep.root)
        sys.stdout.write(vr.to_text())
        if not vr.passed:
            return 1
    return 0 if report.ok else 1


def _cmd_run(args):
    config = ExperimentConfig.from_file(args.config)
    if args.out:
        config.output = args.out

    def progress(done):
        if args.quiet:
            return
        sys.stderr.write(f"\r{done} rows")
        sys.stderr.flush()

    rows = run_experiment(config, progress=progress)
    if not args.quiet:
        sys.stderr.write("\n")
    bad = [r for r in rows if r.status == "ok" and (r.violations or not r.verified)]
    infeasible = [r for r in rows if r.status != "ok"]
    print(f"completed {len(rows)} rows -> {config.output}")
    if infeasible:
        print(f"{len(infeasible)} infeasible row(s)")
    if bad:
        print(f"WARNING: {len(bad)} row(s) with violations or failed verification")
        return 1
    return 0


def _cmd_fit(args):
    rows = read_results(args.results)
    rows = [r for r in rows if r.status == "ok"]
    if args.policy:
        rows = [r for r in rows if r.policy == args.policy]
    if args.nu is not None:
        rows = [r for r in rows if abs(r.nu - args.nu) < 1e-12]
    if args.delta is not None:
        rows = [r for r in rows if r.delta == args.delta]
    if not rows:
        raise AggsimError("no rows left after filtering")
    from collections import defaultdict

    groups = defaultdict(list)
    for r in rows:
        key = r.n if args.x == "n" else 1 + r.delta
        groups[key].append(getattr(r, args.y))
    points = [(k, sum(v) / len(v)) for k, v in sorted(groups.items())]
    slope, intercept, r2 = fit_scaling_exponent(points)
    print(f"points={len(points)} slope={slope:.4f} intercept={intercept:.4f} r2={r2:.5f}")
    return 0


def _cmd_viz(args):
    from .report import build_report

    rows = read_results(args.results)
    written = build_report(rows, args.out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggsim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"aggsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("place", help="generate a uniform deployment")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("graph", help="build knng:k | rgg:r | mst from a deployment")
    p.add_argument("deployment")
    p.add_argument("--kind", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cliques", help="also write the maximal cliques here")
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("schedule", help="build a policy schedule")
    p.add_argument("deployment")
    p.add_argument("--policy", default="alg2", choices=["alg2", "pi_agg", "pi_clq", "mst", "raw"])
    p.add_argument("--from-tree", help="schedule a previously exported tree instead")
    p.add_argument("--from-plan", help="schedule a previously exported plan instead")
    p.add_argument("--nu", type=float, default=2.0)
    p.add_argument("--delta", type=int, default=0)
    p.add_argument("--function", default="sum", help="sum | knng:k | rgg:rho | complete")
    p.add_argument("--path-mode", default="exact", choices=["exact", "heuristic"])
    p.add_argument("--out", required=True)
    p.add_argument("--tree", help="also export the aggregation tree")
    p.add_argument("--plan", help="also export the leveled plan")
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("validate", help="validate a schedule file")
    p.add_argument("schedule")
    p.add_argument("--deployment")
    p.add_argument("--verify", action="store_true", help="also verify aggregate delivery")
    p.add_argument("--function", default="sum")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="override the config output path")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("fit", help="log-log slope over a results table")
    p.add_argument("results")
    p.add_argument("--x", default="n", choices=["n", "delta"])
    p.add_argument("--y", default="energy", choices=["energy", "latency_slots"])
    p.add_argument("--policy")
    p.add_argument("--nu", type=float)
    p.add_argument("--delta", type=int)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("viz-data", help="tidy tables + figures from results")
    p.add_argument("results")
    p.add_argument("--out-dir", default="report")
    p.set_defaults(func=_cmd_viz)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AggsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
