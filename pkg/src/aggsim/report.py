"""Plot-ready summaries of result tables: tidy CSVs plus log-log figures
rendered straight to files (no GUI backend needed).
"""

from __future__ import annotations

import csv
import os
from collections import defaultdict

import numpy as np

from .experiment import bootstrap_mean_ci, fit_scaling_exponent

__all__ = ["summarize", "write_tidy_tables", "render_figures", "build_report"]

SUMMARY_COLUMNS = (
    "policy",
    "n",
    "d",
    "nu",
    "delta",
    "trials",
    "mean_energy",
    "energy_ci_lo",
    "energy_ci_hi",
    "mean_latency",
    "max_latency",
    "total_repairs",
    "total_violations",
    "all_verified",
)


def summarize(rows):
    """Aggregate accepted rows by (policy, n, d, nu, delta) with bootstrap
    intervals on the mean energy."""
    groups = defaultdict(list)
    for row in rows:
        if row.status != "ok":
            continue
        groups[(row.policy, row.n, row.d, row.nu, row.delta)].append(row)
    out = []
    for key in sorted(groups):
        policy, n, d, nu, delta = key
        bucket = groups[key]
        energies = [r.energy for r in bucket]
        mean_e, lo, hi = bootstrap_mean_ci(energies, seed=0)
        out.append(
            {
                "policy": policy,
                "n": n,
                "d": d,
                "nu": nu,
                "delta": delta,
                "trials": len(bucket),
                "mean_energy": mean_e,
                "energy_ci_lo": lo,
                "energy_ci_hi": hi,
                "mean_latency": float(np.mean([r.latency_slots for r in bucket])),
                "max_latency": max(r.latency_slots for r in bucket),
                "total_repairs": sum(r.repairs for r in bucket),
                "total_violations": sum(r.violations for r in bucket),
                "all_verified": int(all(r.verified for r in bucket)),
            }
        )
    return out


def write_tidy_tables(summary, out_dir) -> list:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "summary.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for rec in summary:
            writer.writerow(rec)
    return [path]


def _figure_energy_vs_n(summary, ax):
    by_policy = defaultdict(list)
    for rec in summary:
        by_policy[(rec["policy"], rec["nu"], rec["delta"])].append(rec)
    for (policy, nu, delta), recs in sorted(by_policy.items()):
        recs = sorted(recs, key=lambda r: r["n"])
        ns = [r["n"] for r in recs]
        es = [r["mean_energy"] for r in recs]
        label = f"{policy} nu={nu:g} delta={delta}"
        if len(recs) >= 3 and all(e > 0 for e in es):
            slope, _, _ = fit_scaling_exponent(list(zip(ns, es)))
            label += f" (slope {slope:.2f})"
        ax.plot(ns, es, marker="o", label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean energy")
    ax.legend(fontsize=7)


def _figure_latency_vs_n(summary, ax):
    by_policy = defaultdict(list)
    for rec in summary:
        by_policy[(rec["policy"], rec["nu"], rec["delta"])].append(rec)
    for (policy, nu, delta), recs in sorted(by_policy.items()):
        recs = sorted(recs, key=lambda r: r["n"])
        ax.plot(
            [r["n"] for r in recs],
            [r["mean_latency"] for r in recs],
            marker="o",
            label=f"{policy} nu={nu:g} delta={delta}",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("mean latency (slots)")
    ax.legend(fontsize=7)


def _figure_energy_vs_delta(summary, ax):
    by_policy = defaultdict(list)
    for rec in summary:
        by_policy[(rec["policy"], rec["n"], rec["nu"])].append(rec)
    for (policy, n, nu), recs in sorted(by_policy.items()):
        if len({r["delta"] for r in recs}) < 2:
            continue
        recs = sorted(recs, key=lambda r: r["delta"])
        ax.plot(
            [1 + r["delta"] for r in recs],
            [r["mean_energy"] for r in recs],
            marker="o",
            label=f"{policy} n={n} nu={nu:g}",
        )
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("1 + delta")
    ax.set_ylabel("mean energy")
    ax.legend(fontsize=7)


def render_figures(summary, out_dir) -> list:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    os.makedirs(out_dir, exist_ok=True)
    written = []
    n_values = {rec["n"] for rec in summary}
    delta_values = {rec["delta"] for rec in summary}

    if len(n_values) >= 2:
        for name, fn in (
            ("energy_vs_n.png", _figure_energy_vs_n),
            ("latency_vs_n.png", _figure_latency_vs_n),
        ):
            fig, ax = plt.subplots(figsize=(6.0, 4.2))
            fn(summary, ax)
            fig.tight_layout()
            path = os.path.join(out_dir, name)
            fig.savefig(path, dpi=140)
            plt.close(fig)
            written.append(path)
    if len(delta_values) >= 2:
        fig, ax = plt.subplots(figsize=(6.0, 4.2))
        _figure_energy_vs_delta(summary, ax)
        fig.tight_layout()
        path = os.path.join(out_dir, "energy_vs_delta.png")
        fig.savefig(path, dpi=140)
        plt.close(fig)
        written.append(path)
    return written


def build_report(rows, out_dir) -> list:
    """Summary table plus figures; returns every path written."""
    summary = summarize(rows)
    written = write_tidy_tables(summary, out_dir)
    written.extend(render_figures(summary, out_dir))
    return written
