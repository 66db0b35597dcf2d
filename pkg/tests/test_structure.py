from __future__ import annotations

import random

import pytest

from tapcover import ContractionState, InstanceError, build_instance
from tapcover.structure import (
    build_index,
    find_stems,
    golden_tickets,
    is_node_closed,
    minimally_leaf_closed,
    semi_closed_subtree,
    up_link,
)

from conftest import L_23, L_89, L_86, L_26, L_94


def stems_by_simulation(state):
    """Oracle: contract each link alone and diff the leaf sets."""
    before = state.current_leaves()
    found = []
    for lid in sorted(state.cur_links):
        sim = state.copy()
        sim.contract_links([lid])
        for leaf in sim.current_leaves() - before:
            found.append((leaf, lid))
    return sorted(found)


def random_instance(rng, n, m):
    edges = [(rng.randrange(i), i) for i in range(1, n)]
    links = []
    while len(links) < m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            links.append((u, v))
    return build_instance(edges, 0, links)


class TestClosedness:
    def test_demo_closed_nodes(self, demo):
        st = ContractionState(demo)
        assert is_node_closed(st, 4, 8)
        assert is_node_closed(st, 4, 9)
        assert not is_node_closed(st, 4, 6)  # link (2,6) leaves the subtree
        assert not is_node_closed(st, 4, 5)  # link (5,1) leaves the subtree

    def test_linkless_node_closed(self, demo):
        st = ContractionState(demo)
        assert is_node_closed(st, 4, 7)

    def test_outside_node_rejected(self, demo):
        st = ContractionState(demo)
        with pytest.raises(InstanceError):
            is_node_closed(st, 4, 2)


class TestMinimallyLeafClosed:
    def test_demo_full_tree(self, demo):
        st = ContractionState(demo)
        assert minimally_leaf_closed(st) == 0

    def test_star_internal_links_only(self):
        inst = build_instance([(0, 1), (0, 2), (0, 3)], 0, [(1, 0), (2, 0), (3, 0)])
        st = ContractionState(inst)
        assert minimally_leaf_closed(st) == 0

    def test_two_sibling_subtrees_deeper_wins(self):
        # two internally-linked sibling subtrees; deepest root, then smallest id
        edges = [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)]
        links = [(3, 4), (5, 6)]
        inst = build_instance(edges, 0, links)
        st = ContractionState(inst)
        assert minimally_leaf_closed(st) == 1

    def test_oracle_on_random_instances(self):
        rng = random.Random(11)
        for _ in range(40):
            inst = random_instance(rng, rng.randint(3, 12), rng.randint(2, 10))
            st = ContractionState(inst)
            idx = build_index(st)
            v = minimally_leaf_closed(st, idx)
            leaves_in = [x for x in idx.leaves if idx.in_subtree(v, x)]
            # closed: no leaf link exits
            for leaf in leaves_in:
                for lid in st.links_at(leaf):
                    a, b = st.cur_links[lid]
                    other = b if a == leaf else a
                    assert idx.in_subtree(v, other)
            # minimal: no deeper node is leaf-closed
            for w in idx.order:
                if w == v or idx.depth[w] <= idx.depth[v] or idx.leafcount[w] == 0:
                    continue
                closed = True
                for leaf in idx.leaves:
                    if not idx.in_subtree(w, leaf):
                        continue
                    for lid in st.links_at(leaf):
                        a, b = st.cur_links[lid]
                        other = b if a == leaf else a
                        if not idx.in_subtree(w, other):
                            closed = False
                assert not closed


class TestUpLinks:
    def test_demo_documented_up_links(self, demo):
        st = ContractionState(demo)
        assert up_link(st, 8) == L_86  # up node 5
        assert up_link(st, 2) == L_26  # up node 0
        assert up_link(st, 9) == L_94  # up node 4
        assert up_link(st, 3) == L_23  # up node 1
        assert up_link(st, 6) == L_26  # up node 0

    def test_linkless_leaf_raises(self):
        inst = build_instance([(0, 1), (0, 2)], 0, [(1, 0)])
        st = ContractionState(inst)
        with pytest.raises(InstanceError):
            up_link(st, 2)

    def test_tie_breaks_to_smallest_id(self):
        inst = build_instance([(0, 1), (1, 2), (1, 3)], 0, [(2, 0), (3, 0), (2, 3)])
        st = ContractionState(inst)
        assert up_link(st, 2) == 0
        assert up_link(st, 3) == 1


class TestStems:
    def test_demo_stems(self, demo):
        st = ContractionState(demo)
        recs = find_stems(st)
        assert sorted((r.stem, r.twin) for r in recs) == [(1, L_23), (7, L_89)]

    def test_matches_simulation_oracle(self, demo):
        st = ContractionState(demo)
        recs = find_stems(st)
        assert sorted((r.stem, r.twin) for r in recs) == stems_by_simulation(st)

    def test_simulation_oracle_random(self):
        rng = random.Random(23)
        for _ in range(60):
            inst = random_instance(rng, rng.randint(3, 12), rng.randint(1, 10))
            st = ContractionState(inst)
            recs = find_stems(st)
            assert sorted((r.stem, r.twin) for r in recs) == stems_by_simulation(st)

    def test_spanning_link_no_stem(self):
        inst = build_instance([(0, 1), (1, 2), (2, 3)], 0, [(3, 0)])
        st = ContractionState(inst)
        assert find_stems(st) == []

    def test_two_stem_not_reported(self):
        # two links jointly turning node 1 into a leaf; singly, neither does
        edges = [(0, 1), (1, 2), (1, 3), (1, 4)]
        links = [(2, 3), (3, 4), (2, 0)]
        inst = build_instance(edges, 0, links)
        st = ContractionState(inst)
        assert find_stems(st) == []

    def test_activation_flag(self, demo):
        st = ContractionState(demo)
        recs = find_stems(st, matching={L_23})
        flags = {r.twin: r.activated for r in recs}
        assert flags == {L_23: True, L_89: False}


def b_gadget():
    edges = [(0, 1), (1, 2), (1, 3), (1, 4)]
    links = [(2, 3), (4, 1), (1, 0)]
    return build_instance(edges, 0, links)


def a_gadget():
    edges = [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5)]
    links = [(3, 4), (5, 2), (2, 0)]
    return build_instance(edges, 0, links)


def c_gadget(cross_link=False):
    edges = [(0, 1), (1, 2), (2, 3), (2, 4), (1, 5), (1, 6)]
    links = [(3, 4), (5, 2), (6, 1), (2, 0)]
    if cross_link:
        links.append((5, 6))
    return build_instance(edges, 0, links)


class TestGoldenTickets:
    def test_demo_values(self, demo):
        st = ContractionState(demo)
        gtm = golden_tickets(st)
        assert gtm.value(L_23) == 1
        assert gtm.value(L_89) == 1
        assert gtm.value(L_86) == 0
        assert gtm.value(L_26) == 0
        assert gtm.weight3(L_23) == 5
        assert gtm.weight3(L_86) == 4
        assert gtm.witnesses == []

    def test_stemless_three_leaf_shape(self):
        st = ContractionState(b_gadget())
        gtm = golden_tickets(st)
        assert gtm.value(0) == 2
        assert [(w[0], w[1]) for w in gtm.witnesses] == [(1, "B")]

    def test_twin_three_leaf_shape(self):
        st = ContractionState(a_gadget())
        gtm = golden_tickets(st)
        assert gtm.value(0) == 2
        assert [(w[0], w[1]) for w in gtm.witnesses] == [(1, "A")]

    def test_single_twin_wide_shape(self):
        st = ContractionState(c_gadget())
        gtm = golden_tickets(st)
        assert gtm.value(0) == 2
        assert [(w[0], w[1]) for w in gtm.witnesses] == [(1, "C")]

    def test_wide_shape_needs_no_cross_links(self):
        st = ContractionState(c_gadget(cross_link=True))
        gtm = golden_tickets(st)
        assert gtm.value(0) == 1
        assert gtm.witnesses == []

    def test_open_third_leaf_blocks_shape(self):
        # same as the stemless gadget but the third leaf links outside
        edges = [(0, 5), (5, 1), (1, 2), (1, 3), (1, 4)]
        links = [(2, 3), (4, 0), (1, 0)]
        inst = build_instance(edges, 0, links)
        st = ContractionState(inst)
        gtm = golden_tickets(st)
        assert gtm.value(0) == 0
        assert gtm.witnesses == []

    def test_witness_subtrees_disjoint(self):
        rng = random.Random(5)
        for _ in range(40):
            inst = random_instance(rng, rng.randint(4, 14), rng.randint(2, 12))
            st = ContractionState(inst)
            gtm = golden_tickets(st)
            for i, (_, _, _, nodes_a) in enumerate(gtm.witnesses):
                for _, _, _, nodes_b in gtm.witnesses[i + 1 :]:
                    assert not (nodes_a & nodes_b)

    def test_values_capped_at_two(self):
        rng = random.Random(6)
        for _ in range(40):
            inst = random_instance(rng, rng.randint(4, 14), rng.randint(2, 12))
            gtm = golden_tickets(ContractionState(inst))
            assert all(v in (0, 1, 2) for v in gtm.gt.values())


class TestSemiClosed:
    def test_demo_with_cross_pair(self, demo):
        st = ContractionState(demo)
        sct = semi_closed_subtree(st, {L_86})
        assert sct.root == 4
        assert sct.matched == (L_86,)
        assert sct.unmatched == {9}

    def test_empty_matching_reduces_to_minimally_leaf_closed(self, demo):
        st = ContractionState(demo)
        sct = semi_closed_subtree(st, set())
        assert sct.root == minimally_leaf_closed(st)
        assert sct.matched == ()

    def test_demo_with_sibling_pair_respects(self, demo):
        st = ContractionState(demo)
        sct = semi_closed_subtree(st, {L_23})
        assert sct.root == 0
        assert sct.matched == (L_23,)

    def test_unmatched_and_stem_closedness(self):
        rng = random.Random(9)
        for _ in range(30):
            inst = random_instance(rng, rng.randint(4, 12), rng.randint(2, 10))
            st = ContractionState(inst)
            idx = build_index(st)
            # matching: greedy disjoint leaf-leaf links
            leaves = set(idx.leaves)
            used: set[int] = set()
            matching = []
            for lid in sorted(st.cur_links):
                a, b = st.cur_links[lid]
                if a in leaves and b in leaves and a not in used and b not in used:
                    matching.append(lid)
                    used.update((a, b))
            sct = semi_closed_subtree(st, matching)
            # unmatched leaves of the tree have no link leaving it
            for leaf in sct.unmatched:
                for lid in st.links_at(leaf):
                    a, b = st.cur_links[lid]
                    other = b if a == leaf else a
                    assert idx.in_subtree(sct.root, other)
