from __future__ import annotations

import math
import random

import pytest

from tapcover import (
    InfeasibleInstanceError,
    build_instance,
    is_feasible,
    shadow_complete,
)
from tapcover.solver import (
    OracleBudgetError,
    audit_ledger,
    baseline_two_approx,
    cover,
    enumerate_shadow_minimal_optima,
    exact_opt,
    is_shadow_minimal,
    shadow_minimalize,
    solution_internal_degrees,
)


def random_feasible(rng, n, m):
    edges = [(rng.randrange(i), i) for i in range(1, n)]
    links = []
    while len(links) < m:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            links.append((u, v))
    inst = build_instance(edges, 0, links)
    ok, witness = is_feasible(inst, set(range(inst.m)))
    if ok:
        return inst
    # repair: cover each open edge with a link to an ancestor
    parent = inst.tree.parent
    for x in range(1, n):
        if x in witness:
            continue
        anc = parent[x]
        while anc != 0 and rng.random() < 0.5:
            anc = parent[anc]
        links.append((x, anc))
    inst = build_instance(edges, 0, links)
    ok, _ = is_feasible(inst, set(range(inst.m)))
    assert ok
    return inst


def single_edge():
    return build_instance([(0, 1)], 0, [(1, 0)])


def b_gadget():
    return build_instance([(0, 1), (1, 2), (1, 3), (1, 4)], 0, [(2, 3), (4, 1), (1, 0)])


class TestExactOpt:
    def test_single_edge(self):
        res = exact_opt(single_edge())
        assert res.value == 1

    def test_demo_value(self, demo):
        res = exact_opt(demo)
        assert res.value == 4
        ok, _ = is_feasible(demo, res.solution)
        assert ok

    def test_demo_known_solution_enumerated(self, demo):
        # The documented solution {(2,3),(1,6),(8,9),(4,7)} is a feasible
        # optimum, but (4,7) can shrink to its shadow (5,7) while staying
        # feasible; the shrunken variant is the shadow-minimal one.
        comp = shadow_complete(demo)
        assert exact_opt(comp).value == 4
        sols, truncated = enumerate_shadow_minimal_optima(comp, limit=500)
        assert not truncated
        by_pair = {lk.pair(): lk.id for lk in comp.links}
        documented = frozenset(by_pair[p] for p in [(2, 3), (1, 6), (8, 9), (4, 7)])
        ok, _ = is_feasible(comp, documented)
        assert ok
        shrunk = frozenset(by_pair[p] for p in [(2, 3), (1, 6), (8, 9), (5, 7)])
        assert shrunk in {s.link_ids for s in sols}
        assert documented not in {s.link_ids for s in sols}

    def test_demo_without_cross_links_infeasible(self):
        # removing (2,6) and its subpath (1,5) leaves the edge above node 1
        # uncoverable
        edges = [(0, 1), (1, 2), (1, 3), (0, 4), (4, 5), (5, 6), (5, 7), (7, 8), (7, 9)]
        links = [(2, 3), (8, 9), (8, 6), (9, 4)]
        inst = build_instance(edges, 0, links)
        with pytest.raises(InfeasibleInstanceError):
            exact_opt(inst)

    def test_budget_error(self, demo):
        with pytest.raises(OracleBudgetError):
            exact_opt(demo, max_links=2)

    def test_brute_force_cross_check(self):
        import itertools

        rng = random.Random(3)
        for _ in range(40):
            inst = random_feasible(rng, rng.randint(3, 8), rng.randint(2, 8))
            res = exact_opt(inst)
            best = None
            ids = range(inst.m)
            for k in range(inst.m + 1):
                for combo in itertools.combinations(ids, k):
                    ok, _ = is_feasible(inst, set(combo))
                    if ok:
                        best = k
                        break
                if best is not None:
                    break
            assert res.value == best

    def test_shadow_invariance(self):
        rng = random.Random(4)
        for _ in range(25):
            inst = random_feasible(rng, rng.randint(3, 9), rng.randint(2, 9))
            assert exact_opt(inst).value == exact_opt(shadow_complete(inst)).value


class TestEnumeration:
    def test_single_edge(self):
        sols, truncated = enumerate_shadow_minimal_optima(single_edge())
        assert not truncated
        assert [s.link_ids for s in sols] == [frozenset({0})]

    def test_all_enumerated_are_shadow_minimal_optima(self, demo):
        comp = shadow_complete(demo)
        sols, _ = enumerate_shadow_minimal_optima(comp, limit=500)
        assert sols
        for s in sols:
            assert len(s.link_ids) == 4
            ok, _ = is_feasible(comp, s)
            assert ok
            assert is_shadow_minimal(comp, s)

    def test_leaf_degree_one_in_every_optimum(self):
        rng = random.Random(5)
        for _ in range(20):
            inst = shadow_complete(random_feasible(rng, rng.randint(3, 8), rng.randint(2, 6)))
            sols, _ = enumerate_shadow_minimal_optima(inst, limit=200)
            for s in sols:
                deg = {}
                for lid in s.link_ids:
                    lk = inst.link(lid)
                    for e in (lk.u, lk.v):
                        deg[e] = deg.get(e, 0) + 1
                for leaf in inst.tree.leaves():
                    assert deg.get(leaf, 0) == 1

    def test_minimalize_agrees(self, demo):
        comp = shadow_complete(demo)
        res = exact_opt(comp)
        minimal = shadow_minimalize(comp, res.solution)
        assert len(minimal.link_ids) == res.value
        ok, _ = is_feasible(comp, minimal)
        assert ok
        assert is_shadow_minimal(comp, minimal)


class TestBaseline:
    def test_single_edge_ratio_one(self):
        sol = baseline_two_approx(single_edge())
        assert sol.size == 1

    def test_demo_bound(self, demo):
        sol = baseline_two_approx(demo)
        ok, _ = is_feasible(demo, sol)
        assert ok
        assert sol.size <= 8

    def test_two_opt_bound_random(self):
        rng = random.Random(6)
        for _ in range(40):
            inst = random_feasible(rng, rng.randint(3, 9), rng.randint(2, 9))
            sol = baseline_two_approx(inst)
            ok, _ = is_feasible(inst, sol)
            assert ok
            assert sol.size <= 2 * exact_opt(inst).value

    def test_exact_on_vertical_instances(self):
        rng = random.Random(7)
        for _ in range(30):
            n = rng.randint(3, 9)
            edges = [(rng.randrange(i), i) for i in range(1, n)]
            probe = build_instance(edges, 0, [])
            links = []
            for _ in range(2 * n):
                v = rng.randrange(1, n)
                # pick a strict ancestor
                anc = probe.tree.parent[v]
                while rng.random() < 0.5 and anc != 0:
                    anc = probe.tree.parent[anc]
                links.append((v, anc))
            inst = build_instance(edges, 0, links)
            ok, _ = is_feasible(inst, set(range(inst.m)))
            if not ok:
                continue
            assert baseline_two_approx(inst).size == exact_opt(inst).value


class TestCover:
    def test_single_edge(self):
        sol, trace = cover(single_edge())
        assert sol.link_ids == {0}
        assert len(trace.steps) == 1
        assert trace.steps[0].classification == "root-final"

    def test_demo(self, demo):
        sol, trace = cover(demo)
        ok, _ = is_feasible(demo, sol)
        assert ok
        assert sol.size <= 5  # floor(4*4/3)
        led = audit_ledger(trace, opt=4)
        assert led.violations == []
        assert trace.falsifications == []

    def test_gadget_takes_extra_credit_step(self):
        sol, trace = cover(b_gadget())
        ok, _ = is_feasible(b_gadget(), sol)
        assert ok
        kinds = [s.kind for s in trace.steps]
        assert "witness-B" in kinds
        wit = next(s for s in trace.steps if s.kind == "witness-B")
        assert wit.classification == "extra-credit"
        assert wit.banked3 == 3
        assert trace.steps[-1].classification == "root-final"
        assert sol.size == exact_opt(b_gadget()).value == 3

    def test_infeasible_rejected(self):
        inst = build_instance([(0, 1), (0, 2)], 0, [(1, 0)])
        with pytest.raises(InfeasibleInstanceError):
            cover(inst)

    def test_listing_mode_demo(self, demo):
        sol, trace = cover(demo, mode="listing")
        ok, _ = is_feasible(demo, sol)
        assert ok
        assert sol.size <= 5

    def test_random_ratio_and_ledger(self):
        rng = random.Random(8)
        for _ in range(60):
            inst = random_feasible(rng, rng.randint(4, 12), rng.randint(4, 16))
            sol, trace = cover(inst)
            ok, _ = is_feasible(inst, sol)
            assert ok
            opt = exact_opt(inst).value
            assert sol.size <= math.ceil(4 * opt / 3), (inst.m, sol.size, opt)
            led = audit_ledger(trace, opt=opt)
            assert led.violations == []
            # stem rematching never increased weight
            for before, after in trace.stem_weight_checks:
                assert after <= before

    def test_listing_mode_random(self):
        rng = random.Random(9)
        for _ in range(25):
            inst = random_feasible(rng, rng.randint(4, 10), rng.randint(4, 12))
            sol, trace = cover(inst, mode="listing")
            ok, _ = is_feasible(inst, sol)
            assert ok
            opt = exact_opt(inst).value
            assert sol.size <= math.ceil(4 * opt / 3)


class TestLowerBounds:
    def test_initial_lower_bound_claim(self):
        rng = random.Random(10)
        for _ in range(30):
            inst = shadow_complete(random_feasible(rng, rng.randint(3, 9), rng.randint(2, 8)))
            res = exact_opt(inst)
            fmin = shadow_minimalize(inst, res.solution)
            leaves = set(inst.tree.leaves())
            pairs = 0
            singles = 0
            for lid in fmin.link_ids:
                lk = inst.link(lid)
                lu, lv = lk.u in leaves, lk.v in leaves
                if lu and lv:
                    pairs += 1
                elif lu or lv:
                    singles += 1
            degs = solution_internal_degrees(inst, fmin)
            assert 4 * pairs + 3 * singles + sum(degs.values()) <= 4 * res.value

    def test_audit_flags_corruption(self, demo):
        _sol, trace = cover(demo)
        step = trace.steps[0]
        step.income3 -= 3  # books no longer balance against the step's parts
        led = audit_ledger(trace)
        assert led.violations
        _sol2, trace2 = cover(demo)
        trace2.steps[0].consumed_compounds = (99,)  # double-spent node credit
        led2 = audit_ledger(trace2)
        assert any("99" in v for v in led2.violations)
