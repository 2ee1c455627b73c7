import itertools
import math
import random

import numpy as np
import pytest

from aggsim.errors import InvalidParameterError
from aggsim.geometry import Deployment, place_uniform
from aggsim.graphs import (
    UndirectedGraph,
    build_knng,
    build_mst,
    build_rgg,
    load_edge_list,
    max_degree,
    maximal_cliques,
    proper_edge_coloring,
    save_edge_list,
)


def collinear(xs):
    return Deployment(np.array([[float(x)] for x in xs]), seed=0, root=0)


def random_graph(rng, n, p):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
    return UndirectedGraph(n, edges)


class TestKnng:
    def test_collinear_k1(self):
        g = build_knng(collinear([0, 1, 2]), 1)
        # node 1 ties between 0 and 2; the smaller id wins, but 1-2 comes
        # back in via node 2's own relation
        assert g.edges == ((0, 1), (1, 2))

    def test_full_k(self):
        dep = place_uniform(6, 2, 0)
        g = build_knng(dep, 5)
        assert len(g.edges) == 15

    def test_two_nodes(self):
        g = build_knng(place_uniform(2, 2, 1), 1)
        assert g.edges == ((0, 1),)

    def test_k_out_of_range(self):
        dep = place_uniform(4, 2, 0)
        with pytest.raises(InvalidParameterError):
            build_knng(dep, 4)
        with pytest.raises(InvalidParameterError):
            build_knng(dep, 0)

    def test_matches_bruteforce_on_large_path(self):
        # the KD-tree path must agree with the dense path
        dep = place_uniform(700, 2, 3)
        g = build_knng(dep, 3)
        pos = dep.positions
        diff = pos[:, None, :] - pos[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=2))
        np.fill_diagonal(dist, np.inf)
        order = np.argsort(dist, axis=1, kind="stable")
        expect = set()
        for i in range(dep.n):
            for j in order[i, :3]:
                expect.add((i, int(j)) if i < j else (int(j), i))
        assert set(g.edges) == expect

    def test_degree_stays_bounded_as_n_grows(self):
        degrees = []
        for exp in range(8, 14):
            g = build_knng(place_uniform(2**exp, 2, 100 + exp), 3)
            degrees.append(max_degree(g))
        # constant bound: no growth trend across a 32x size range
        assert max(degrees) <= degrees[0] + 3
        assert degrees[-1] <= max(degrees[:3]) + 2


class TestRgg:
    def test_collinear_radius_one(self):
        g = build_rgg(collinear([0, 1, 2]), 1.0)
        assert g.edges == ((0, 1), (1, 2))

    def test_radius_at_least_diameter(self):
        dep = place_uniform(8, 2, 2)
        g = build_rgg(dep, 100.0)
        assert len(g.edges) == 8 * 7 // 2

    def test_tiny_radius_empty(self):
        dep = place_uniform(8, 2, 2)
        g = build_rgg(dep, 1e-9)
        assert g.edges == ()

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(InvalidParameterError):
            build_rgg(place_uniform(4, 2, 0), 0.0)

    def test_degree_growth_is_slow(self):
        # max degree should stay within a generous log n / log log n envelope
        f = lambda n: math.log(n) / math.log(math.log(n))
        base_n = 2**8
        base = max_degree(build_rgg(place_uniform(base_n, 2, 55), 1.5))
        c = max(base / f(base_n), 1.0)
        for exp in range(9, 14):
            n = 2**exp
            deg = max_degree(build_rgg(place_uniform(n, 2, 55 + exp), 1.5))
            assert deg <= 2.0 * c * f(n) + 4


class TestMst:
    def test_collinear(self):
        g = build_mst(collinear([0, 1, 2]))
        assert g.edges == ((0, 1), (1, 2))

    def test_tiny(self):
        assert build_mst(place_uniform(2, 2, 0)).edges == ((0, 1),)
        assert build_mst(place_uniform(1, 2, 0)).edges == ()

    def test_optimal_against_prufer_enumeration(self):
        # total length equals the exhaustive minimum over all spanning trees
        def tree_from_prufer(seq, n):
            degree = [1] * n
            for x in seq:
                degree[x] += 1
            edges = []
            seq = list(seq)
            for x in seq:
                for leaf in range(n):
                    if degree[leaf] == 1:
                        edges.append((leaf, x))
                        degree[leaf] -= 1
                        degree[x] -= 1
                        break
            last = [v for v in range(n) if degree[v] == 1]
            edges.append((last[0], last[1]))
            return edges

        for seed in range(6):
            n = 6
            dep = place_uniform(n, 2, seed)
            pos = dep.positions

            def total(edges):
                return sum(float(np.linalg.norm(pos[a] - pos[b])) for a, b in edges)

            best = min(
                total(tree_from_prufer(seq, n))
                for seq in itertools.product(range(n), repeat=n - 2)
            )
            got = total(build_mst(dep).edges)
            assert got == pytest.approx(best, rel=1e-12)

    def test_handles_duplicate_points(self):
        pos = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        g = build_mst(Deployment(pos))
        assert len(g.edges) == 3


class TestCliques:
    def test_triangle(self):
        g = UndirectedGraph(3, [(0, 1), (1, 2), (0, 2)])
        assert maximal_cliques(g).cliques == ((0, 1, 2),)

    def test_path(self):
        g = UndirectedGraph(3, [(0, 1), (1, 2)])
        assert maximal_cliques(g).cliques == ((0, 1), (1, 2))

    def test_edgeless_gives_singletons(self):
        g = UndirectedGraph(4, [])
        assert maximal_cliques(g).cliques == ((0,), (1,), (2,), (3,))

    def test_against_bruteforce(self):
        def brute(g):
            all_cliques = []
            for r in range(1, g.n + 1):
                for sub in itertools.combinations(range(g.n), r):
                    if all(g.has_edge(a, b) for a, b in itertools.combinations(sub, 2)):
                        all_cliques.append(set(sub))
            maximal = [s for s in all_cliques if not any(s < t for t in all_cliques)]
            return tuple(sorted(tuple(sorted(s)) for s in maximal))

        rng = random.Random(1)
        for _ in range(100):
            g = random_graph(rng, rng.randint(1, 10), rng.uniform(0.1, 0.9))
            assert maximal_cliques(g).cliques == brute(g)

    def test_every_node_covered(self):
        dep = place_uniform(300, 2, 8)
        cs = maximal_cliques(build_knng(dep, 3))
        covered = set()
        for c in cs:
            covered.update(c)
        assert covered == set(range(300))


class TestMaxDegree:
    def test_star(self):
        g = UndirectedGraph(4, [(0, 1), (0, 2), (0, 3)])
        assert max_degree(g) == 3

    def test_triangle(self):
        assert max_degree(UndirectedGraph(3, [(0, 1), (1, 2), (0, 2)])) == 2

    def test_edgeless(self):
        assert max_degree(UndirectedGraph(5, [])) == 0


class TestEdgeColoring:
    def test_triangle_needs_three(self):
        g = UndirectedGraph(3, [(0, 1), (1, 2), (0, 2)])
        col = proper_edge_coloring(g)
        assert col.is_proper(g)
        assert len(set(col.color.values())) == 3  # 2 colors provably infeasible

    def test_star(self):
        g = UndirectedGraph(4, [(0, 1), (0, 2), (0, 3)])
        col = proper_edge_coloring(g)
        assert col.is_proper(g)
        assert len(set(col.color.values())) == 3

    def test_two_edge_path(self):
        g = UndirectedGraph(3, [(0, 1), (1, 2)])
        col = proper_edge_coloring(g)
        assert col.is_proper(g)
        assert len(set(col.color.values())) == 2

    def test_random_graphs_proper_within_vizing_bound(self):
        rng = random.Random(7)
        for _ in range(200):
            g = random_graph(rng, rng.randint(2, 50), rng.uniform(0.05, 0.95))
            col = proper_edge_coloring(g)
            assert col.is_proper(g)
            used = set(col.color.values())
            if used:
                assert max(used) <= max_degree(g) + 1

    def test_proximity_graphs_large(self):
        dep = place_uniform(2**12, 2, 13)
        for g in (build_knng(dep, 3), build_rgg(dep, 1.5)):
            col = proper_edge_coloring(g)
            assert col.is_proper(g)
            assert max(col.color.values()) <= max_degree(g) + 1


def test_edge_list_round_trip(tmp_path):
    dep = place_uniform(40, 2, 4)
    g = build_knng(dep, 2)
    path = tmp_path / "g.txt"
    save_edge_list(g, path)
    back = load_edge_list(path)
    assert back.n == g.n and back.edges == g.edges
