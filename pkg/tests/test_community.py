"""Community detection: value oracle agreement, optimality, planted recovery."""

import math

import numpy as np
import pytest

from moneyflow import (
    aggregate,
    blocks_scenario,
    build_network,
    community_report,
    detect_communities,
    flat_table,
    generate,
    map_equation_value,
)
from moneyflow.community import EmptyModuleError, build_walk

from conftest import make_links, net_from_edges, random_edges
from oracles import (
    BatchMapEquation,
    adjusted_rand_index,
    all_partitions,
    dense_walk,
    map_equation_entropy,
)


def walk_inputs(net):
    """(n, edges, weights) for the reference walk, frequency-weighted."""
    edges = list(zip(net.src.tolist(), net.dst.tolist()))
    return net.n_nodes, edges, net.freq.astype(float).tolist()


class TestValueOracle:
    def test_two_cycle_single_module(self):
        # balanced 2-cycle in one module: no exit traffic, value is the
        # one-bit entropy of the uniform visit distribution
        net = net_from_edges(2, [(0, 1), (1, 0)], freqs=[3, 3])
        assert map_equation_value(net, [0, 0]) == pytest.approx(1.0, abs=1e-12)

    def test_batch_evaluator_matches_entropy_form(self, rng):
        # the acceptance enumeration leans on the batch evaluator, so the
        # batch arithmetic must agree with the literal codebook entropies
        edges = random_edges(rng, 5, 9)
        net = net_from_edges(5, edges)
        n, eds, wts = walk_inputs(net)
        batch = BatchMapEquation(n, eds, wts, tau=0.15)
        parts = all_partitions(5)
        got = batch.values(parts)
        for row, labels in enumerate(parts):
            want = map_equation_entropy(n, eds, wts, labels.tolist(), tau=0.15)
            assert got[row] == pytest.approx(want, abs=1e-10)

    def test_package_value_matches_entropy_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(6, 26))
            edges = random_edges(rng, n, int(2.2 * n))
            net = net_from_edges(n, edges)
            labels = rng.integers(0, int(rng.integers(2, 5)), size=n)
            _, labels = np.unique(labels, return_inverse=True)
            want = map_equation_entropy(*walk_inputs(net), labels.tolist(), tau=0.15)
            got = map_equation_value(net, labels.tolist())
            assert got == pytest.approx(want, rel=1e-10, abs=1e-10)

    def test_two_cliques_split_beats_merge(self):
        edges = [
            (b + i, b + j)
            for b in (0, 5)
            for i in range(5)
            for j in range(5)
            if i != j
        ]
        net = net_from_edges(10, edges, freqs=[2] * len(edges))
        one = map_equation_value(net, [0] * 10)
        two = map_equation_value(net, [0] * 5 + [1] * 5)
        assert one == pytest.approx(math.log2(10), abs=1e-12)
        assert two < one
        # same comparison through the independent formula
        n, eds, wts = walk_inputs(net)
        assert map_equation_entropy(
            n, eds, wts, [0] * 10, tau=0.15
        ) > map_equation_entropy(n, eds, wts, [0] * 5 + [1] * 5, tau=0.15)

    def test_group_form_partition(self):
        net = net_from_edges(3, [(0, 1), (1, 2), (2, 0)])
        by_labels = map_equation_value(net, [0, 0, 1])
        by_groups = map_equation_value(net, [["n0000", "n0001"], ["n0002"]])
        assert by_groups == by_labels

    def test_empty_module_raises(self):
        net = net_from_edges(3, [(0, 1), (1, 2), (2, 0)])
        with pytest.raises(EmptyModuleError):
            map_equation_value(net, [0, 2, 2])
        with pytest.raises(EmptyModuleError):
            map_equation_value(net, [["n0000", "n0001", "n0002"], []])

    def test_bad_partitions(self):
        net = net_from_edges(3, [(0, 1), (1, 2), (2, 0)])
        with pytest.raises(ValueError):
            map_equation_value(net, [0, 0])
        with pytest.raises(ValueError):
            map_equation_value(net, [0, -1, 0])
        with pytest.raises(ValueError):
            map_equation_value(net, [["n0000", "n0001"]])

    def test_zero_link_walk_undefined(self):
        net = net_from_edges(3, [(0, 1), (1, 2)])
        sub, _ = net.subnetwork(np.array([0, 2]))
        with pytest.raises(ValueError, match="no links"):
            map_equation_value(sub, [0, 0])


class TestOptimizer:
    def test_attains_enumerated_minimum(self, rng):
        # exhaustive check on 20 small graphs; the acceptance suite repeats
        # this at larger sizes
        parts_cache = {}
        for case in range(20):
            n = 4 + case % 5
            edges = random_edges(rng, n, int(rng.integers(n, 2 * n + 1)))
            net = net_from_edges(n, edges)
            tree = detect_communities(net, seed=case, trials=10)
            if n not in parts_cache:
                parts_cache[n] = all_partitions(n)
            batch = BatchMapEquation(*walk_inputs(net), tau=0.15)
            best = float(batch.values(parts_cache[n]).min())
            assert tree.value == pytest.approx(best, abs=1e-9)
            top = map_equation_value(net, tree.top_labels().tolist())
            assert top == pytest.approx(best, abs=1e-9)

    def test_history_monotone(self, rng):
        for case in range(5):
            n = int(rng.integers(10, 40))
            edges = random_edges(rng, n, 3 * n)
            net = net_from_edges(n, edges)
            tree = detect_communities(net, seed=case, trials=4)
            hist = np.asarray(tree.history)
            assert np.all(np.diff(hist) <= 1e-12)
            assert hist[-1] == pytest.approx(tree.value, abs=1e-6)

    def test_deterministic_per_seed(self, rng):
        edges = random_edges(rng, 30, 90)
        net = net_from_edges(30, edges)
        a = detect_communities(net, seed=7, trials=5)
        b = detect_communities(net, seed=7, trials=5)
        assert a.as_dict() == b.as_dict()
        assert a.history == b.history

    def test_seed_validation(self):
        net = net_from_edges(2, [(0, 1), (1, 0)])
        with pytest.raises(ValueError):
            detect_communities(net, seed=-1)


class TestPlantedStructure:
    def test_two_disconnected_cliques(self):
        edges = [
            (b + i, b + j)
            for b in (0, 5)
            for i in range(5)
            for j in range(5)
            if i != j
        ]
        net = net_from_edges(10, edges, freqs=[2] * len(edges))
        tree = detect_communities(net, seed=0, trials=5)
        assert len(tree.children) == 2
        assert all(c.irreducible for c in tree.children)
        assert sorted(len(c.members) for c in tree.children) == [5, 5]

    def test_four_blocks_recovered(self):
        spec = blocks_scenario(n_nodes=240, seed=5, n_blocks=4)
        records, truth = generate(spec)
        net = build_network(aggregate(records))
        tree = detect_communities(net, seed=0, trials=10)
        got = tree.top_labels().tolist()
        want = [truth.communities[name][0] for name in net.node_ids]
        assert adjusted_rand_index(got, want) >= 0.9

    def test_nested_blocks_refine(self):
        # six groups of two dense sub-blocks each; the optimizer keeps most
        # groups whole at the top and the recursion splits them
        spec = blocks_scenario(n_nodes=240, seed=0, n_blocks=12, nested=True)
        records, truth = generate(spec)
        net = build_network(aggregate(records))
        tree = detect_communities(net, seed=0, trials=10)

        levels = {c.level for c in tree.communities()}
        assert levels == {1, 2}
        deep = [c for c in tree.communities() if c.level == 2]
        assert len(deep) >= 2

        # every child community refines its parent
        for comm in tree.communities():
            for child in comm.children:
                assert set(child.members) <= set(comm.members)
                assert child.level == comm.level + 1

        # leaves tile the node set and recover the planted sub-blocks
        seen = [v for leaf in tree.leaves() for v in leaf.members]
        assert sorted(seen) == list(range(net.n_nodes))
        leaf_label = {}
        for m, leaf in enumerate(tree.leaves()):
            for v in leaf.members:
                leaf_label[v] = m
        got = [leaf_label[i] for i in range(net.n_nodes)]
        want = [tuple(truth.communities[name]) for name in net.node_ids]
        assert adjusted_rand_index(got, want) >= 0.9

    def test_zero_link_network(self):
        net = net_from_edges(3, [(0, 1), (1, 2)])
        sub, _ = net.subnetwork(np.array([0, 2]))
        tree = detect_communities(sub, seed=0)
        assert tree.value == 0.0
        assert len(tree.children) == 1
        assert tree.children[0].irreducible
        assert tree.children[0].members == (0, 1)

    def test_single_node_network(self):
        net = net_from_edges(2, [(0, 1)])
        sub, _ = net.subnetwork(np.array([0]))
        tree = detect_communities(sub, seed=0)
        assert len(tree.children) == 1
        assert tree.children[0].members == (0,)


@pytest.fixture(scope="module")
def nested_tree():
    spec = blocks_scenario(n_nodes=240, seed=0, n_blocks=12, nested=True)
    records, _ = generate(spec)
    net = build_network(aggregate(records))
    return detect_communities(net, seed=0, trials=10)


class TestReportAndTable:
    def test_report_levels(self, nested_tree):
        report = community_report(nested_tree)
        rows = {r.level: r for r in report.rows}
        assert sorted(rows) == [1, 2]
        n = nested_tree.n_nodes
        assert rows[1].accounts == n
        assert rows[1].ratio == pytest.approx(1.0)
        assert rows[1].communities == len(nested_tree.children)
        level2 = [c for c in nested_tree.communities() if c.level == 2]
        assert rows[2].communities == len(level2)
        assert rows[2].accounts == sum(c.size for c in level2)
        assert rows[2].ratio == pytest.approx(rows[2].accounts / n)
        total_irreducible = sum(r.irreducible for r in report.rows)
        assert total_irreducible == len(nested_tree.leaves())

    def test_size_rank(self, nested_tree):
        report = community_report(nested_tree)
        ranks = [rank for rank, _ in report.size_rank]
        sizes = [size for _, size in report.size_rank]
        assert ranks == list(range(1, len(sizes) + 1))
        assert sizes == sorted(sizes, reverse=True)
        assert sum(sizes) == nested_tree.n_nodes
        assert sizes == sorted(
            (len(c.members) for c in nested_tree.leaves()), reverse=True
        )

    def test_flat_table(self, nested_tree):
        rows = flat_table(nested_tree)
        header, body = rows[0], rows[1:]
        assert header == ["node_id", "level_1", "level_2", "irreducible"]
        assert len(body) == nested_tree.n_nodes
        assert [r[0] for r in body] == list(nested_tree.node_ids)

        by_node = {r[0]: r for r in body}
        leaf_ids = set()
        for leaf in nested_tree.leaves():
            trails = {
                tuple(by_node[nested_tree.node_ids[v]][1:]) for v in leaf.members
            }
            # all members of one leaf share one trail, distinct per leaf
            assert len(trails) == 1
            trail = trails.pop()
            assert trail[-1] not in leaf_ids
            leaf_ids.add(trail[-1])
            if leaf.level == 1:
                assert trail[1] == ""

    def test_report_dict_shape(self, nested_tree):
        as_dict = community_report(nested_tree).as_dict()
        assert set(as_dict) == {"levels", "size_rank"}
        assert all(
            set(row) == {"level", "communities", "irreducible", "accounts", "ratio"}
            for row in as_dict["levels"]
        )
        assert all(set(row) == {"rank", "size"} for row in as_dict["size_rank"])
