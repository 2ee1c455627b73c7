import numpy as np
import pytest

from aggsim.errors import ScheduleConflictError
from aggsim.geometry import Deployment, EnergyParams, ceil_log2, place_uniform
from aggsim.scheduling import (
    ContributionToken,
    Schedule,
    Transmission,
    load_schedule,
    save_schedule,
    schedule_energy,
    schedule_plan,
    schedule_tree,
    validate_schedule,
    verify_aggregate,
)
from aggsim.tradeoff import PlanPath, AggregationPlan, build_agg_plan, compute_weights
from aggsim.trees import (
    AggregationTree,
    brute_force_min_makespan,
    build_bisection_tree,
    tree_latency,
)


def random_tree(rng, n):
    return AggregationTree([-1] + [int(rng.integers(0, v)) for v in range(1, n)], 0)


class TestScheduleTree:
    def test_star_three_slots(self):
        t = AggregationTree([-1, 0, 0, 0], 0)
        s = schedule_tree(t)
        assert s.makespan == 3
        assert all(len(slot) == 1 for slot in s.slots)
        assert validate_schedule(s).ok

    def test_chain_unique_order(self):
        t = AggregationTree([-1, 0, 1], 0)  # root <- a <- b
        s = schedule_tree(t)
        assert [ (tr.tx, tr.rx) for tr in s.slots[0] ] == [(2, 1)]
        assert [ (tr.tx, tr.rx) for tr in s.slots[1] ] == [(1, 0)]

    def test_binomial_eight(self):
        from aggsim.trees import build_min_latency_tree

        t = build_min_latency_tree(8)
        s = schedule_tree(t)
        assert s.makespan == 3
        assert validate_schedule(s).ok
        assert verify_aggregate(s, None, 0).passed

    def test_makespan_equals_latency_on_random_trees(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            t = random_tree(rng, int(rng.integers(2, 65)))
            s = schedule_tree(t)
            assert s.makespan == tree_latency(t)
            assert validate_schedule(s).ok
            assert verify_aggregate(s, None, 0).passed

    def test_matches_bruteforce_makespan_small(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            t = random_tree(rng, int(rng.integers(2, 9)))
            assert schedule_tree(t).makespan == brute_force_min_makespan(t)


class TestSchedulePlan:
    def test_width_one_windows_match_tree_schedule(self):
        dep = place_uniform(64, 2, 5)
        ws = compute_weights(64, 2, EnergyParams(4.0), 0)
        plan = build_agg_plan(dep, ws)
        s = schedule_plan(plan)
        t = schedule_tree(build_bisection_tree(dep))
        assert s.makespan == t.makespan == ceil_log2(64)

    def test_right_alignment_of_multihop_path(self):
        # one level-0 path of 3 hops in a window of width 3: hops occupy the
        # last 3 slots and land exactly on the window end
        ws = compute_weights(2, 1, EnergyParams(4.0), 5)
        assert ws.w == (2,)
        plan = AggregationPlan(
            n=5,
            root=0,
            weights=ws,
            levels=((PlanPath(level=0, parent=0, child=4, nodes=(4, 3, 2, 0)),),),
            repairs=(),
        )
        s = schedule_plan(plan)
        assert len(s.slots) == 3
        assert [(tr.tx, tr.rx) for tr in s.slots[0]] == [(4, 3)]
        assert [(tr.tx, tr.rx) for tr in s.slots[1]] == [(3, 2)]
        assert [(tr.tx, tr.rx) for tr in s.slots[2]] == [(2, 0)]

    def test_disjoint_paths_share_slots(self):
        ws = compute_weights(4, 2, EnergyParams(4.0), 0)
        plan = AggregationPlan(
            n=6,
            root=0,
            weights=ws,
            levels=(
                (PlanPath(level=0, parent=0, child=1, nodes=(1, 0)),),
                (
                    PlanPath(level=1, parent=0, child=2, nodes=(2, 0)),
                    PlanPath(level=1, parent=1, child=3, nodes=(3, 1)),
                ),
            ),
            repairs=(),
        )
        s = schedule_plan(plan)
        assert len(s.slots[0]) == 2  # both level-1 paths coexist
        assert validate_schedule(s).ok

    def test_node_collision_detected(self):
        ws = compute_weights(4, 2, EnergyParams(4.0), 0)
        plan = AggregationPlan(
            n=6,
            root=0,
            weights=ws,
            levels=(
                (PlanPath(level=0, parent=0, child=1, nodes=(1, 0)),),
                (
                    PlanPath(level=1, parent=0, child=2, nodes=(2, 0)),
                    PlanPath(level=1, parent=1, child=2, nodes=(2, 1)),
                ),
            ),
            repairs=(),
        )
        with pytest.raises(ScheduleConflictError):
            schedule_plan(plan)

    def test_repairs_prepended_and_counted(self):
        dep = place_uniform(40, 2, 2)
        ws = compute_weights(40, 2, EnergyParams(4.0), 6)
        plan = build_agg_plan(dep, ws, path_mode="heuristic")
        forced = AggregationPlan(
            n=plan.n,
            root=plan.root,
            weights=plan.weights,
            levels=plan.levels,
            repairs=((39, plan.root),) if not plan.repairs else plan.repairs,
        )
        s = schedule_plan(forced)
        assert s.repair_slots == forced.repair_count
        first = s.slots[0]
        assert len(first) == 1 and first[0].tx == forced.repairs[0][0]


class TestValidator:
    def test_clean_star(self):
        s = schedule_tree(AggregationTree([-1, 0, 0, 0], 0))
        assert validate_schedule(s).ok

    def test_half_duplex_violation(self):
        s = Schedule(3, [[Transmission(0, 1), Transmission(1, 2)]])
        kinds = {v.kind for v in validate_schedule(s).violations}
        assert "half-duplex" in kinds

    def test_multiple_reception(self):
        s = Schedule(3, [[Transmission(0, 2), Transmission(1, 2)]])
        kinds = {v.kind for v in validate_schedule(s).violations}
        assert "multiple-rx" in kinds

    def test_multiple_transmission(self):
        s = Schedule(3, [[Transmission(0, 1), Transmission(0, 2)]])
        kinds = {v.kind for v in validate_schedule(s).violations}
        assert "multiple-tx" in kinds

    def test_self_loop_and_bad_node(self):
        s = Schedule(2, [[Transmission(0, 0)], [Transmission(5, 1)]])
        kinds = {v.kind for v in validate_schedule(s).violations}
        assert "self-loop" in kinds and "bad-node" in kinds

    def test_token_causality(self):
        # node 1 forwards node 2's token before ever receiving it
        tok = ContributionToken("measurement", 2)
        s = Schedule(
            3,
            [
                [Transmission(1, 0, payload=(tok,))],
                [Transmission(2, 1, payload=(tok,))],
            ],
        )
        kinds = {v.kind for v in validate_schedule(s).violations}
        assert "token-causality" in kinds

    def test_causality_ok_when_received_first(self):
        tok = ContributionToken("measurement", 2)
        s = Schedule(
            3,
            [
                [Transmission(2, 1, payload=(tok,))],
                [Transmission(1, 0, payload=(tok, ContributionToken("measurement", 1)))],
            ],
        )
        assert validate_schedule(s).ok


class TestVerifier:
    def test_star_sum(self):
        s = schedule_tree(AggregationTree([-1, 0, 0, 0], 0))
        rep = verify_aggregate(s, None, 0)
        assert rep.passed and rep.mode == "sum"

    def test_missing_node_detected(self):
        # node 3 never transmits
        s = Schedule(4, [[Transmission(1, 0)], [Transmission(2, 0)]])
        rep = verify_aggregate(s, None, 0)
        assert not rep.passed and 3 in rep.missing

    def test_duplicate_contribution_detected(self):
        own = ContributionToken("measurement", 1)
        s = Schedule(
            2,
            [
                [Transmission(1, 0, payload=(own,))],
                [Transmission(1, 0, payload=(own,))],
            ],
        )
        rep = verify_aggregate(s, None, 0)
        assert not rep.passed and 1 in rep.duplicated

    def test_plan_flow_counts_relays_once(self):
        for seed in range(6):
            dep = place_uniform(128, 2, seed)
            ws = compute_weights(128, 2, EnergyParams(4.0), 16)
            plan = build_agg_plan(dep, ws, path_mode="heuristic")
            s = schedule_plan(plan)
            assert validate_schedule(s, dep).ok
            assert verify_aggregate(s, None, dep.root).passed


def test_schedule_io_round_trip(tmp_path):
    dep = place_uniform(30, 2, 1)
    s = schedule_tree(build_bisection_tree(dep))
    path = tmp_path / "sched.txt"
    save_schedule(s, path)
    back = load_schedule(path)
    assert back.n == s.n
    assert [(t.tx, t.rx) for slot in back.slots for t in slot] == [
        (t.tx, t.rx) for slot in s.slots for t in slot
    ]
    assert back.makespan == s.makespan


def test_schedule_energy_matches_hop_sum():
    dep = Deployment(np.array([[0.0], [1.0], [3.0]]))
    s = Schedule(3, [[Transmission(2, 1)], [Transmission(1, 0)]])
    assert schedule_energy(s, dep, EnergyParams(2.0)) == pytest.approx(4.0 + 1.0)
