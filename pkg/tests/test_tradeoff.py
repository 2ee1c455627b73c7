import itertools

import numpy as np
import pytest

from aggsim.errors import InvalidParameterError
from aggsim.geometry import Deployment, EnergyParams, ceil_log2, place_uniform, path_energy
from aggsim.scheduling import schedule_plan
from aggsim.tradeoff import (
    build_agg_plan,
    compute_weights,
    hop_bounded_path_exact,
    hop_bounded_path_heuristic,
)
from aggsim.trees import build_bisection_tree, tree_energy


def collinear(xs):
    return Deployment(np.array([[float(x)] for x in xs]), seed=0, root=0)


class TestWeights:
    def test_low_exponent_all_zero(self):
        ws = compute_weights(64, 2, EnergyParams(1.5), 100)
        assert ws.w == (0,) * 6
        assert ws.zeta == 0.0

    def test_closed_form_high_exponent(self):
        ws = compute_weights(16, 2, EnergyParams(4.0), 10)
        assert ws.zeta == pytest.approx(1 - 2 ** (-0.25))
        assert ws.zeta == pytest.approx(0.15910, abs=1e-5)
        assert ws.w == (1, 1, 1, 0)
        assert ws.total == 3 <= 10

    def test_boundary_exponent_constant_share(self):
        ws = compute_weights(16, 2, EnergyParams(2.0), 8)
        assert ws.w == (2, 2, 2, 2)

    def test_budget_never_exceeded_on_sweep(self):
        # 10^4 parameter points
        count = 0
        ns = (2, 3, 5, 9, 17, 33, 64, 129, 511, 999, 4096, 65_537)
        nus = (1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0)
        deltas = (*range(0, 40, 3), 64, 100, 256, 481, 1000, 2500, 4096, 8191,
                  10_000, 12_345, 65_536, 10**6, 3, 7, 11)
        for n in ns:
            for d in (1, 2, 3):
                for nu in nus:
                    for delta in deltas:
                        ws = compute_weights(n, d, EnergyParams(nu), delta)
                        assert sum(ws.w) <= delta
                        count += 1
                        if nu > d:
                            assert all(a >= b for a, b in zip(ws.w, ws.w[1:]))
        assert count >= 10_000

    def test_rejects_negative_budget(self):
        with pytest.raises(InvalidParameterError):
            compute_weights(16, 2, EnergyParams(4.0), -1)


class TestExactPath:
    def test_direct_when_no_relays(self):
        dep = collinear([0, 1, 2])
        p = hop_bounded_path_exact(dep, {0, 1, 2}, 0, 2, 0, EnergyParams(2.0))
        assert p == [0, 2]
        assert path_energy(p, dep, EnergyParams(2.0)) == pytest.approx(4.0)

    def test_one_relay_halves_quadratic_cost(self):
        dep = collinear([0, 1, 2])
        p = hop_bounded_path_exact(dep, {0, 1, 2}, 0, 2, 1, EnergyParams(2.0))
        assert p == [0, 1, 2]
        assert path_energy(p, dep, EnergyParams(2.0)) == pytest.approx(2.0)

    def test_tie_prefers_fewer_hops(self):
        dep = collinear([0, 1, 2])
        p = hop_bounded_path_exact(dep, {0, 1, 2}, 0, 2, 1, EnergyParams(1.0))
        assert p == [0, 2]

    def test_rejects_equal_endpoints(self):
        dep = collinear([0, 1, 2])
        with pytest.raises(InvalidParameterError):
            hop_bounded_path_exact(dep, {0, 1}, 1, 1, 1, EnergyParams(2.0))

    def test_optimal_against_enumeration(self):
        rng = np.random.default_rng(4)
        nu_choices = (1.0, 2.0, 4.0)
        for trial in range(200):
            n = int(rng.integers(2, 11))
            dep = place_uniform(n, 2, trial)
            params = EnergyParams(nu_choices[trial % 3])
            u, v = rng.choice(n, size=2, replace=False)
            budget = int(rng.integers(0, 5))
            cands = set(int(x) for x in rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
            got = hop_bounded_path_exact(dep, cands, int(u), int(v), budget, params)
            pool = [c for c in cands if c not in (u, v)]
            best = min(
                path_energy([int(u), *mid, int(v)], dep, params)
                for r in range(budget + 1)
                for mid in itertools.permutations(pool, r)
            )
            assert path_energy(got, dep, params) == pytest.approx(best, rel=1e-12)
            assert len(got) - 2 <= budget


class TestHeuristicPath:
    def test_snaps_midpoint(self):
        dep = collinear([0, 1, 2])
        p = hop_bounded_path_heuristic(dep, {0, 1, 2}, 0, 2, 1, EnergyParams(2.0))
        assert p == [0, 1, 2]

    def test_zero_budget_direct(self):
        dep = collinear([0, 1, 2])
        assert hop_bounded_path_heuristic(dep, {0, 1, 2}, 0, 2, 0, EnergyParams(2.0)) == [0, 2]

    def test_no_interior_candidates_collapses_to_direct(self):
        # snapping hits the endpoints themselves; repeats collapse away
        dep = collinear([0, 5, 10])
        p = hop_bounded_path_heuristic(dep, {0, 2}, 0, 2, 3, EnergyParams(2.0))
        assert p == [0, 2]

    def test_short_segment_uses_fewer_points(self):
        # distance 1.5 with budget 5: ceil(1.5)-1 = 1 subdivision point
        pos = np.array([[0.0, 0.0], [0.7, 0.0], [1.5, 0.0]])
        dep = Deployment(pos)
        p = hop_bounded_path_heuristic(dep, {0, 1, 2}, 0, 2, 5, EnergyParams(4.0))
        assert len(p) - 2 <= 1

    def test_never_beats_exact(self):
        rng = np.random.default_rng(6)
        ratios = []
        for trial in range(300):
            n = int(rng.integers(4, 40))
            dep = place_uniform(n, 2, 10_000 + trial)
            params = EnergyParams(4.0)
            u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
            budget = int(rng.integers(0, 5))
            cands = set(range(n))
            h = hop_bounded_path_heuristic(dep, cands, u, v, budget, params)
            e = hop_bounded_path_exact(dep, cands, u, v, budget, params)
            eh = path_energy(h, dep, params)
            ee = path_energy(e, dep, params)
            assert eh >= ee - 1e-12
            if ee > 0:
                ratios.append(eh / ee)
        assert np.mean(ratios) <= 4.0  # loose sanity envelope


class TestAggPlan:
    def test_zero_weights_degenerate_to_bisection_tree(self):
        dep = place_uniform(64, 2, 1)
        ws = compute_weights(64, 2, EnergyParams(4.0), 0)
        plan = build_agg_plan(dep, ws)
        tree = build_bisection_tree(dep)
        plan_edges = set()
        for level in plan.levels:
            for p in level:
                assert len(p.nodes) == 2
                plan_edges.add((p.nodes[1], p.nodes[0]))
        tree_edges = {(tree.parent[v], v) for v in range(64) if v != tree.root}
        assert plan_edges == tree_edges
        assert plan.repair_count == 0
        assert plan.energy(dep, EnergyParams(4.0)) == pytest.approx(
            tree_energy(tree, dep, EnergyParams(4.0))
        )

    def test_two_nodes_single_path(self):
        dep = place_uniform(2, 2, 0)
        ws = compute_weights(2, 2, EnergyParams(4.0), 7)
        plan = build_agg_plan(dep, ws)
        assert len(plan.levels) == 1
        assert len(plan.levels[0]) == 1
        assert plan.levels[0][0].child == 1 and plan.levels[0][0].parent == 0

    def test_relays_cut_energy_on_collinear_line(self):
        dep = collinear([0, 1, 2, 3])
        params = EnergyParams(4.0)
        ws0 = compute_weights(4, 1, params, 0)
        ws8 = compute_weights(4, 1, params, 8)
        e0 = build_agg_plan(dep, ws0).energy(dep, params)
        e8 = build_agg_plan(dep, ws8, path_mode="exact").energy(dep, params)
        assert e8 < e0

    def test_intra_level_paths_node_disjoint(self):
        for seed in range(5):
            dep = place_uniform(200, 2, seed)
            ws = compute_weights(200, 2, EnergyParams(4.0), 16)
            plan = build_agg_plan(dep, ws, path_mode="heuristic")
            for level in plan.levels:
                seen = set()
                for p in level:
                    for node in p.nodes:
                        assert node not in seen
                        seen.add(node)

    def test_hop_budgets_respected(self):
        dep = place_uniform(300, 2, 3)
        ws = compute_weights(300, 2, EnergyParams(4.0), 32)
        for mode in ("exact", "heuristic"):
            plan = build_agg_plan(dep, ws, path_mode=mode)
            for k, level in enumerate(plan.levels):
                for p in level:
                    assert p.hops <= ws.w[k] + 1

    def test_every_node_covered_or_repaired(self):
        for seed in range(8):
            dep = place_uniform(257, 2, seed)
            ws = compute_weights(257, 2, EnergyParams(4.0), 24)
            plan = build_agg_plan(dep, ws, path_mode="heuristic")
            touched = {dep.root}
            for level in plan.levels:
                for p in level:
                    touched.update(p.nodes)
            touched.update(y for y, _ in plan.repairs)
            assert touched == set(range(257))

    def test_energy_nonincreasing_in_delta_on_average(self):
        # expectation over seeds; per-instance monotonicity is not promised
        params = EnergyParams(4.0)
        deltas = (0, 2, 4, 8, 16, 32)
        seeds = range(50)
        n = 4096
        means = []
        for delta in deltas:
            ws = compute_weights(n, 2, params, delta)
            vals = [
                build_agg_plan(place_uniform(n, 2, s), ws, path_mode="heuristic").energy(
                    place_uniform(n, 2, s), params
                )
                for s in seeds
            ]
            means.append(np.mean(vals))
        for a, b in zip(means, means[1:]):
            assert b <= a * 1.0000001

    def test_makespan_bound(self):
        for seed in range(5):
            dep = place_uniform(100, 2, seed)
            for delta in (0, 3, 9):
                ws = compute_weights(100, 2, EnergyParams(4.0), delta)
                plan = build_agg_plan(dep, ws, path_mode="heuristic")
                s = schedule_plan(plan)
                assert s.makespan <= ceil_log2(100) + delta + plan.repair_count

    def test_plan_io_round_trip(self, tmp_path):
        from aggsim.tradeoff import load_plan, save_plan

        dep = place_uniform(90, 2, 4)
        ws = compute_weights(90, 2, EnergyParams(4.0), 12)
        plan = build_agg_plan(dep, ws, path_mode="heuristic")
        path = tmp_path / "plan.txt"
        save_plan(plan, path)
        back = load_plan(path)
        assert back.levels == plan.levels
        assert back.repairs == plan.repairs
        assert back.weights.w == plan.weights.w
        assert schedule_plan(back).makespan == schedule_plan(plan).makespan
