"""Top-level algorithms: the deferred primal-dual cover, the folklore
2-approximation, the exact optimum oracle, and shadow-minimal enumeration.

The cover loop iterates: enforce the no-link-between-credited-nodes
invariant, price links by certified credit, compute the leaf edge cover and
rematch it into a usable matching, contract certified witness subtrees as
extra-credit steps, then cover one semi-closed subtree and contract it.
Every step logs income and spending in integer thirds; the audit replays
the ledger and reports violations as data, never as crashes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .contraction import ContractionState
from .instance import (
    Instance,
    InfeasibleInstanceError,
    Solution,
    build_instance,
    covers_all_edges,
    is_feasible,
    link_path,
)
from .matching import (
    StemMatchingResult,
    is_usable,
    leaf_cover_graph,
    min_weight_edge_cover,
    stem_matching,
)
from .structure import (
    GoldenTicketMap,
    SemiClosedTree,
    TreeIndex,
    _semi_closed_with_scratch,
    find_stems,
    golden_tickets,
    up_link,
)


class OracleBudgetError(RuntimeError):
    """The exact search exceeded its link or expansion budget."""


@dataclass
class CoverStep:
    root: int
    classification: str  # 'primal-dual' | 'extra-credit' | 'root-final'
    kind: str  # 'independence' | 'witness-A/B/C' | 'semi-closed' | 'enlarged' | 'constant-exact' | 'root'
    links: tuple[int, ...]
    income3: int
    spent3: int
    banked3: int
    injected3: int = 0  # credit injected at the new compound (deferred phase boundary)
    claim3: int = 0  # income taken on the strength of a paper-claim case
    unmatched: tuple[int, ...] = ()
    pairs: tuple[tuple[int, int], ...] = ()  # (link id, certified credit)
    stem_pairs: tuple[tuple[int, int, int], ...] = ()
    consumed_compounds: tuple[int, ...] = ()
    new_compound: int = -1


@dataclass
class CoverTrace:
    mode: str
    steps: list[CoverStep] = field(default_factory=list)
    falsifications: list[dict] = field(default_factory=list)
    first_cover_weight3: int | None = None  # matching weight of the first edge cover
    first_cover_unmatched: int | None = None
    first_cover_total3: int | None = None
    stem_weight_checks: list[tuple[int, int]] = field(default_factory=list)
    restarts: int = 0

    def to_json_dict(self, instance: Instance) -> dict:
        return {
            "mode": self.mode,
            "restarts": self.restarts,
            "first_cover": {
                "matching_weight3": self.first_cover_weight3,
                "unmatched": self.first_cover_unmatched,
                "total3": self.first_cover_total3,
            },
            "stem_weight_checks": self.stem_weight_checks,
            "falsifications": self.falsifications,
            "steps": [
                {
                    "root": s.root,
                    "classification": s.classification,
                    "kind": s.kind,
                    "links": [list(instance.link(lid).pair()) for lid in s.links],
                    "income3": s.income3,
                    "spent3": s.spent3,
                    "banked3": s.banked3,
                    "injected3": s.injected3,
                    "claim3": s.claim3,
                }
                for s in self.steps
            ],
        }


@dataclass
class CreditLedger:
    """Replay of a trace: per-node banked thirds plus spend history."""

    banked: dict[int, int] = field(default_factory=dict)
    spent3: int = 0
    income3: int = 0
    injected3: int = 0
    claim3: int = 0
    violations: list[str] = field(default_factory=list)


@dataclass
class OracleResult:
    value: int
    solution: Solution
    degrees: dict[int, int]
    expansions: int


def _feasibility_precheck(instance: Instance) -> None:
    if not covers_all_edges(instance, range(instance.m)):
        raise InfeasibleInstanceError("some tree edge is covered by no link")


def _independence_link(state: ContractionState) -> int | None:
    """Smallest link joining two compound nodes.

    Compound-to-original-leaf links stay: the original leaf can still be
    matched, and the compound is covered by its own up-link later.  Two
    contracted trees sharing a link merge, one unit paying for the link.
    """
    best = None
    for v in range(state.base.n):
        if not state.live[v] or not state.compound[v]:
            continue
        for lid in state.links_at(v):
            a, b = state.cur_links[lid]
            other = b if a == v else a
            if state.compound[other]:
                if best is None or lid < best:
                    best = lid
    return best


def _cover_edges_of_subtree(state: ContractionState, idx: TreeIndex, v: int, links) -> list[int]:
    """Nodes of T_v whose parent edge is left uncovered by the given links."""
    covered: set[int] = set()
    for lid in links:
        path = state.current_path(lid)
        depth = state.base.tree.depth
        for a, b in zip(path, path[1:]):
            child = a if depth[a] > depth[b] else b
            covered.add(child)
    uncovered = []
    for x in idx.order:
        if x != v and idx.in_subtree(v, x) and x not in covered:
            uncovered.append(x)
    return uncovered


def _greedy_cover_subtree(
    state: ContractionState, idx: TreeIndex, v: int, seed_links: list[int]
) -> list[int] | None:
    """Extend seed links to a full cover of T_v, deepest uncovered edge first.

    Candidate links for an edge prefer staying inside T_v and reaching as
    high as possible; exiting links are a last resort (the contraction then
    swallows part of the chain above, which is sound but larger).
    """
    chosen = list(dict.fromkeys(seed_links))
    for _ in range(2 * len(idx.order) + 2):
        uncovered = _cover_edges_of_subtree(state, idx, v, chosen)
        if not uncovered:
            return chosen
        x = max(uncovered, key=lambda q: (idx.depth[q], -q))
        best = None
        for node in idx.order:
            if not idx.in_subtree(x, node):
                continue
            for lid in state.links_at(node):
                a, b = state.cur_links[lid]
                other = b if a == node else a
                if idx.in_subtree(x, other):
                    continue  # does not cross the uncovered edge
                reach = idx.depth[idx.lca(a, b)]
                inside = 1 if idx.in_subtree(v, other) or idx.lca(a, b) == v else 0
                key = (-inside, reach, lid)
                if best is None or key < best[0]:
                    best = (key, lid)
        if best is None:
            return None
        chosen.append(best[1])
    return None


def classify_tree(
    state: ContractionState,
    sct: SemiClosedTree,
    gtm: GoldenTicketMap,
    smres: StemMatchingResult,
    scratch: ContractionState,
    sidx: TreeIndex,
    idx: TreeIndex,
    exact_budget: int = 30_000,
) -> CoverStep:
    """Pick B(T_v) and classify the step per the case table.

    The basic cover is the matching inside T_v plus up-links of unmatched
    leaves computed on the matching-contracted view.  Two-pair trees with
    ten or more unmatched leaves enlarge to a minimally leaf-closed
    ancestor tree; remaining trees with at most nine leaves take an exact
    constant-size sub-cover.
    """
    v = sct.root
    root = state.current_root()
    stem_links = {p[2] for p in smres.stem_pairs}
    pairs = [(lid, gtm.value(lid)) for lid in sct.matched if lid not in stem_links]
    stem_in = tuple(p for p in smres.stem_pairs if p[2] in sct.matched)

    basic = list(sct.matched)
    for u in sorted(sct.unmatched):
        basic.append(up_link(scratch, u, sidx))
    basic = list(dict.fromkeys(basic))
    income = 3 * len(sct.unmatched) + sum(4 + g for (_lid, g) in pairs) + 3 * len(stem_in)

    kind = "semi-closed"
    claim = 0
    B = basic
    step_root = v

    if v == root:
        kind = "root"
        classification = "root-final"
    elif len(pairs) == 2 and len(sct.unmatched) >= 10:
        # enlarge to the deepest leaf-closed tree containing T_v
        w = v
        best_w = None
        while True:
            if _is_leaf_closed(state, idx, w):
                best_w = w
                break
            if w == root:
                break
            w = state.cur_parent[w]
        w = best_w if best_w is not None else root
        leaves_w = [x for x in idx.leaves if idx.in_subtree(w, x)]
        inside_pairs = []
        used = set()
        for lid in smres.matching:
            a, b = state.cur_links[lid]
            if idx.in_subtree(w, a) and idx.in_subtree(w, b) and lid not in stem_links:
                inside_pairs.append((lid, gtm.value(lid)))
                used.update((a, b))
        B = list(dict.fromkeys(up_link(state, x, idx) for x in leaves_w))
        free = [x for x in leaves_w if x not in used]
        income = 3 * len(free) + sum(4 + g for (_lid, g) in inside_pairs)
        pairs = inside_pairs
        stem_in = ()
        sct = SemiClosedTree(w, frozenset(leaves_w), tuple(lid for lid, _ in inside_pairs), frozenset(free))
        step_root = w
        kind = "enlarged"
        claim = max(0, 3 * len(B) - income)
        classification = "primal-dual" if w != root else "root-final"
    else:
        classification = "primal-dual"
        if 3 <= len(sct.leaves) <= 9:
            sub = _exact_subcover(state, idx, v, exact_budget)
            if sub is not None and len(sub) < len(B):
                B = sub
                kind = "constant-exact"
        margin = income - 3 * len(B)
        if margin >= 3 and len(sct.leaves) >= 3 and v != root:
            classification = "extra-credit"

    spent = 3 * len(B)
    banked = 3 if classification == "extra-credit" else 0
    injected = 0
    if classification == "primal-dual":
        surplus = income - spent
        injected = 0 if surplus >= 3 else 3  # deferred unit for the new compound
    consumed_comp = tuple(x for x in sorted(sct.unmatched) if state.compound[x])
    return CoverStep(
        root=step_root,
        classification=classification,
        kind=kind,
        links=tuple(B),
        income3=income,
        spent3=spent,
        banked3=banked,
        injected3=injected,
        claim3=claim,
        unmatched=tuple(sorted(sct.unmatched)),
        pairs=tuple(pairs),
        stem_pairs=stem_in,
        consumed_compounds=consumed_comp,
    )


def _is_leaf_closed(state: ContractionState, idx: TreeIndex, w: int) -> bool:
    for leaf in idx.leaves:
        if not idx.in_subtree(w, leaf):
            continue
        for lid in state.links_at(leaf):
            a, b = state.cur_links[lid]
            other = b if a == leaf else a
            if not idx.in_subtree(w, other):
                return False
    return True


def _exact_subcover(
    state: ContractionState, idx: TreeIndex, v: int, budget: int
) -> list[int] | None:
    """Optimal cover of T_v over truncated current links, or None on budget."""
    nodes = [x for x in idx.order if idx.in_subtree(v, x)]
    if len(nodes) > 60:
        return None
    remap = {x: i for i, x in enumerate(nodes)}
    edges = [(remap[state.cur_parent[x]], remap[x]) for x in nodes if x != v]
    pair_to_lid: dict[tuple[int, int], int] = {}
    seen_nodes = set(nodes)
    for x in nodes:
        for lid in state.links_at(x):
            a, b = state.cur_links[lid]
            other = b if a == x else a
            ga = remap[x]
            gb = remap[other] if other in seen_nodes else remap[v]
            if ga == gb:
                continue
            key = (min(ga, gb), max(ga, gb))
            if key not in pair_to_lid or lid < pair_to_lid[key]:
                pair_to_lid[key] = lid
    links = sorted(pair_to_lid)
    if not links:
        return None
    sub = build_instance(edges, remap[v], links)
    try:
        res = exact_opt(sub, max_links=64, max_expansions=budget)
    except (OracleBudgetError, InfeasibleInstanceError):
        return None
    chosen = []
    for lid in res.solution.link_ids:
        lk = sub.link(lid)
        chosen.append(pair_to_lid[lk.pair()])
    return sorted(set(chosen))


def cover(
    instance: Instance,
    mode: str = "accumulate",
    exact_budget: int = 30_000,
) -> tuple[Solution, CoverTrace]:
    """Compute a feasible augmentation via the deferred primal-dual loop.

    ``accumulate`` keeps every chosen link (extra-credit contractions are
    permanent and bank one unit).  ``listing`` re-derives the tree from
    scratch after each primal-dual step, discarding links that were not
    part of a primal-dual step, per the literal algorithm listing.
    """
    if mode not in ("accumulate", "listing"):
        raise ValueError(f"unknown mode {mode!r}")
    _feasibility_precheck(instance)
    trace = CoverTrace(mode=mode)
    state = ContractionState(instance)
    chosen: set[int] = set()
    primal_only: set[int] = set()
    first_pass = True
    guard = 6 * (instance.n + instance.m) + 32

    while state.num_live > 1:
        guard -= 1
        if guard < 0:
            raise RuntimeError("cover loop failed to terminate")

        # (0) no credited pair may stay linked: contract and bank
        lid = _independence_link(state)
        if lid is not None:
            a, b = state.cur_links[lid]
            comp = tuple(x for x in (a, b) if state.compound[x])
            reps = state.contract_links([lid])
            chosen.add(lid)
            trace.steps.append(
                CoverStep(
                    root=reps[0],
                    classification="extra-credit",
                    kind="independence",
                    links=(lid,),
                    income3=6,
                    spent3=3,
                    banked3=3,
                    unmatched=(a, b),
                    consumed_compounds=comp,
                    new_compound=reps[0],
                )
            )
            continue

        # (1) price links, cover the leaves, rematch stems
        idx = TreeIndex(state)
        stems = find_stems(state, idx)
        gtm = golden_tickets(state, stems, idx)
        graph = leaf_cover_graph(state, gtm, idx)
        cov = min_weight_edge_cover(graph)
        smres = stem_matching(state, cov, gtm, stems, idx)
        if first_pass:
            trace.first_cover_total3 = cov.total3
            trace.first_cover_unmatched = len(cov.unmatched)
            trace.first_cover_weight3 = cov.total3 - 3 * len(cov.unmatched)
            first_pass = False
        trace.stem_weight_checks.append((smres.weight3_before, smres.weight3_after))

        # multi-pair groups that would contract into a new leaf: the pairs
        # fund their own links, so take them outright and restart the pass
        if smres.forced_groups:
            forced_any = False
            for links, tags in smres.forced_groups:
                live_group = [l for l in links if l in state.cur_links]
                if not live_group:
                    continue
                live_tags = [(l, g) for (l, g) in tags if l in live_group]
                income = sum(3 if g == -1 else 4 + g for (_l, g) in live_tags)
                reps = state.contract_links(live_group)
                chosen.update(live_group)
                surplus = income - 3 * len(live_group)
                trace.steps.append(
                    CoverStep(
                        root=reps[0],
                        classification="primal-dual",
                        kind="two-stem",
                        links=tuple(live_group),
                        income3=income,
                        spent3=3 * len(live_group),
                        banked3=0,
                        injected3=0 if surplus >= 3 else 3,
                        pairs=tuple(live_tags),
                        new_compound=reps[0],
                    )
                )
                forced_any = True
                if state.num_live == 1:
                    break
            if forced_any:
                continue

        matching = list(smres.matching)
        if not is_usable(state, matching):
            trace.falsifications.append(
                {"kind": "unusable-matching", "matching": sorted(matching)}
            )

        # (2) contract certified witness subtrees as extra-credit steps
        did_witness = False
        for wroot, tag, _wlinks, wnodes in gtm.witnesses:
            if not state.live[wroot]:
                continue
            split = False
            inside_pairs: list[tuple[int, int]] = []
            stem_in: list[tuple[int, int, int]] = []
            stem_links = {p[2] for p in smres.stem_pairs}
            for mlid in matching:
                ma, mb = state.cur_links[mlid]
                ina, inb = ma in wnodes, mb in wnodes
                if ina != inb:
                    split = True
                    break
                if ina:
                    if mlid in stem_links:
                        stem_in.extend(p for p in smres.stem_pairs if p[2] == mlid)
                    else:
                        inside_pairs.append((mlid, gtm.value(mlid)))
            if split:
                continue
            leaves_in = [x for x in idx.leaves if x in wnodes]
            if len(leaves_in) < 2:
                continue
            used = {e for mlid, _g in inside_pairs for e in state.cur_links[mlid]}
            used |= {e for p in stem_in for e in state.cur_links[p[2]]}
            free = [x for x in leaves_in if x not in used]
            income = 3 * len(free) + sum(4 + g for (_l, g) in inside_pairs) + 3 * len(stem_in)
            seed = [mlid for mlid, _g in inside_pairs] + [p[2] for p in stem_in]
            # contract the branch subtree: any degree-2 chain above it is
            # recognition tolerance and is covered by a later up-link
            region = leaves_in[0]
            for x in leaves_in[1:]:
                region = idx.lca(region, x)
            B = _greedy_cover_subtree(state, idx, region, seed)
            if B is None or 3 * len(B) + 3 > income:
                continue
            comp = tuple(x for x in sorted(free) if state.compound[x])
            reps = state.contract_links(B)
            chosen.update(B)
            trace.steps.append(
                CoverStep(
                    root=region,
                    classification="extra-credit",
                    kind=f"witness-{tag}",
                    links=tuple(B),
                    income3=income,
                    spent3=3 * len(B),
                    banked3=3,
                    unmatched=tuple(sorted(free)),
                    pairs=tuple(inside_pairs),
                    stem_pairs=tuple(stem_in),
                    consumed_compounds=comp,
                    new_compound=reps[0] if reps else -1,
                )
            )
            matching = [m for m in matching if m in state.cur_links]
            did_witness = True
            if state.num_live == 1:
                break
        if did_witness:
            continue

        # (3) cover one semi-closed subtree
        sct, scratch, sidx = _semi_closed_with_scratch(state, matching, stems)
        step = classify_tree(state, sct, gtm, smres, scratch, sidx, idx, exact_budget)
        uncovered = _cover_edges_of_subtree(state, idx, step.root, step.links)
        if uncovered:
            trace.falsifications.append(
                {
                    "kind": "basic-cover-gap",
                    "root": step.root,
                    "uncovered": uncovered,
                    "links": sorted(step.links),
                }
            )
            repaired = _greedy_cover_subtree(state, idx, step.root, list(step.links))
            if repaired is None:
                raise InfeasibleInstanceError("subtree cannot be covered")
            step = CoverStep(
                root=step.root,
                classification=step.classification,
                kind=step.kind,
                links=tuple(repaired),
                income3=step.income3,
                spent3=3 * len(repaired),
                banked3=step.banked3,
                injected3=step.injected3,
                claim3=step.claim3,
                unmatched=step.unmatched,
                pairs=step.pairs,
                stem_pairs=step.stem_pairs,
                consumed_compounds=step.consumed_compounds,
            )
        if step.claim3 == 0 and step.spent3 > step.income3:
            trace.falsifications.append(
                {
                    "kind": "negative-margin",
                    "root": step.root,
                    "spent3": step.spent3,
                    "income3": step.income3,
                }
            )
        reps = state.contract_links(step.links)
        if step.classification != "root-final":
            step.new_compound = reps[0] if reps else -1
        chosen.update(step.links)
        trace.steps.append(step)

        if mode == "listing" and step.classification == "primal-dual":
            primal_only.update(step.links)
            if chosen != primal_only:
                trace.restarts += 1
                if trace.restarts > instance.m + 8:
                    trace.falsifications.append({"kind": "listing-restart-cap"})
                else:
                    chosen = set(primal_only)
                    state = ContractionState(instance)
                    if chosen:
                        state.contract_links(sorted(chosen))
        elif step.classification == "primal-dual":
            primal_only.update(step.links)

    sol = state.lift_solution(chosen)
    if not covers_all_edges(instance, sol.link_ids):
        raise RuntimeError("cover produced an infeasible solution")
    return sol, trace


def audit_ledger(trace: CoverTrace, opt: int | None = None) -> CreditLedger:
    """Replay a trace's credit flow and report violations as entries."""
    led = CreditLedger()
    seen_links: set[int] = set()
    for i, s in enumerate(trace.steps):
        expect = (
            3 * len(s.unmatched)
            + sum(3 if g == -1 else 4 + g for (_l, g) in s.pairs)
            + 3 * len(s.stem_pairs)
            + s.claim3
        )
        if s.kind == "independence":
            expect = 6
        if s.income3 != expect:
            led.violations.append(f"step {i}: income {s.income3} != components {expect}")
        if s.spent3 != 3 * len(set(s.links)):
            led.violations.append(f"step {i}: spent {s.spent3} != 3|B|")
        need = s.spent3 + s.banked3
        if s.income3 + s.injected3 < need:
            led.violations.append(
                f"step {i}: overdraft: income {s.income3}+inj {s.injected3} < {need}"
            )
        for c in s.consumed_compounds:
            if led.banked.pop(c, 0) != 3:
                led.violations.append(f"step {i}: compound {c} consumed without banked unit")
        if s.new_compound >= 0 and (s.banked3 or s.injected3):
            led.banked[s.new_compound] = 3
        elif s.new_compound >= 0 and s.income3 - s.spent3 >= 3:
            led.banked[s.new_compound] = 3  # funded by the step's own surplus
        elif s.new_compound >= 0:
            led.banked[s.new_compound] = 3
            led.injected3 += 3
        overlap = seen_links & set(s.links)
        if overlap and trace.restarts == 0:
            led.violations.append(f"step {i}: links {sorted(overlap)} chosen twice")
        seen_links |= set(s.links)
        led.spent3 += s.spent3
        led.income3 += s.income3
        led.injected3 += s.injected3
        led.claim3 += s.claim3
    if opt is not None:
        spent_links = len(seen_links)
        if spent_links > math.ceil(4 * opt / 3):
            led.violations.append(
                f"ratio: |Q|={spent_links} exceeds ceil(4*OPT/3)={math.ceil(4 * opt / 3)}"
            )
    return led


def baseline_two_approx(instance: Instance) -> Solution:
    """Folklore 2-approximation: split links at their top node, solve the
    vertical instance exactly by the deepest-first greedy, map back."""
    _feasibility_precheck(instance)
    tree = instance.tree
    n = tree.n
    # split each link at its top node into one or two vertical pieces
    verticals: list[list[tuple[int, int, int, int]]] = [[] for _ in range(n)]
    for lk in instance.links:
        path = link_path(instance, lk)
        top = min(path, key=lambda q: tree.depth[q])
        for end in (lk.u, lk.v):
            if end != top:
                verticals[end].append((tree.depth[top], lk.id, top, end))
    best: list[tuple[int, int, int, int] | None] = [None] * n
    order = sorted(range(n), key=lambda q: -tree.depth[q])
    for x in order:
        b = min(verticals[x]) if verticals[x] else None
        for c in tree.children[x]:
            if best[c] is not None and (b is None or best[c] < b):
                b = best[c]
        best[x] = b
    covered = [False] * n
    chosen: set[int] = set()
    for x in order:
        if x == tree.root or covered[x]:
            continue
        b = best[x]
        if b is None or b[0] >= tree.depth[x]:
            raise InfeasibleInstanceError(f"edge above node {x} cannot be covered")
        _d, lid, top, end = b
        chosen.add(lid)
        q = end
        while q != top:
            covered[q] = True
            q = tree.parent[q]
    return Solution(frozenset(chosen))


def _maximal_links(instance: Instance) -> list[int]:
    # shadows are dominated by their origins, so only originals can be maximal
    originals = [lk.id for lk in instance.links if not lk.is_shadow]
    sets = {lid: set(link_path(instance, lid)) for lid in originals}
    by_pair: dict[tuple[int, int], int] = {}
    for lid in originals:
        key = instance.link(lid).pair()
        if key not in by_pair:
            by_pair[key] = lid
    keep = []
    for lid in sorted(by_pair.values()):
        u, v = instance.link(lid).u, instance.link(lid).v
        dominated = False
        for other in by_pair.values():
            if other == lid:
                continue
            s = sets[other]
            if u in s and v in s and len(sets[lid]) < len(s):
                dominated = True
                break
        if not dominated:
            keep.append(lid)
    return keep


def exact_opt(
    instance: Instance,
    max_links: int | None = 24,
    max_expansions: int = 500_000,
) -> OracleResult:
    """Exact minimum augmentation size by iterative-deepening branch and bound.

    Searches over shadow-maximal links only (a shadow never beats the link
    it came from).  Branches on the uncovered tree edge with the fewest
    covering candidates; deepening keeps the first solution found optimal.
    """
    _feasibility_precheck(instance)
    tree = instance.tree
    cands = _maximal_links(instance)
    if max_links is not None and len(cands) > max_links:
        raise OracleBudgetError(f"{len(cands)} candidate links exceed budget {max_links}")
    edge_children = [v for v in range(tree.n) if v != tree.root]
    cover_sets: dict[int, set[int]] = {}
    for lid in cands:
        path = link_path(instance, lid)
        s = set()
        for a, b in zip(path, path[1:]):
            s.add(a if tree.depth[a] > tree.depth[b] else b)
        cover_sets[lid] = s
    cands_for_edge: dict[int, list[int]] = {c: [] for c in edge_children}
    for lid in cands:
        for c in cover_sets[lid]:
            cands_for_edge[c].append(lid)
    leaf_edges = {v for v in edge_children if tree.is_leaf(v)}
    expansions = 0

    def lower_bound(counts: dict[int, int]) -> int:
        open_leaves = sum(1 for v in leaf_edges if counts[v] == 0)
        return (open_leaves + 1) // 2

    def search(chosen: list[int], counts: dict[int, int], budget: int) -> list[int] | None:
        nonlocal expansions
        expansions += 1
        if expansions > max_expansions:
            raise OracleBudgetError("expansion budget exceeded")
        open_edges = [c for c in edge_children if counts[c] == 0]
        if not open_edges:
            return list(chosen)
        if budget <= 0 or lower_bound(counts) > budget:
            return None
        pick = min(open_edges, key=lambda c: (len(cands_for_edge[c]), -tree.depth[c], c))
        for lid in cands_for_edge[pick]:
            if lid in chosen:
                continue
            chosen.append(lid)
            for c in cover_sets[lid]:
                counts[c] += 1
            got = search(chosen, counts, budget - 1)
            for c in cover_sets[lid]:
                counts[c] -= 1
            chosen.pop()
            if got is not None:
                return got
        return None

    counts0 = {c: 0 for c in edge_children}
    start = lower_bound(counts0)
    for k in range(max(1, start), len(cands) + 1):
        got = search([], dict(counts0), k)
        if got is not None:
            sol = Solution(frozenset(got))
            degs = solution_internal_degrees(instance, sol)
            return OracleResult(len(got), sol, degs, expansions)
    raise InfeasibleInstanceError("no cover exists over maximal links")


def solution_internal_degrees(instance: Instance, sol: Solution) -> dict[int, int]:
    tree = instance.tree
    degs: dict[int, int] = {}
    for lid in sol.link_ids:
        lk = instance.link(lid)
        for e in (lk.u, lk.v):
            if not tree.is_leaf(e):
                degs[e] = degs.get(e, 0) + 1
    return degs


def _shadows_of(instance: Instance, lid: int, path_sets: dict[int, set[int]]) -> list[int]:
    u, v = instance.link(lid).u, instance.link(lid).v
    mine = path_sets[lid]
    out = []
    for other in path_sets:
        if other == lid:
            continue
        s = path_sets[other]
        ou, ov = instance.link(other).u, instance.link(other).v
        if ou in mine and ov in mine and len(s) < len(mine):
            out.append(other)
    return sorted(out)


def shadow_minimalize(instance: Instance, sol: Solution) -> Solution:
    """Replace links by shadows until no single replacement stays feasible."""
    path_sets = {lk.id: set(link_path(instance, lk)) for lk in instance.links}
    current = set(sol.link_ids)
    changed = True
    while changed:
        changed = False
        for lid in sorted(current):
            for s in sorted(
                _shadows_of(instance, lid, path_sets),
                key=lambda x: (len(path_sets[x]), x),
            ):
                if s in current:
                    continue
                trial = (current - {lid}) | {s}
                ok, _ = is_feasible(instance, trial)
                if ok:
                    current = trial
                    changed = True
                    break
            if changed:
                break
    return Solution(frozenset(current))


def is_shadow_minimal(instance: Instance, sol: Solution) -> bool:
    path_sets = {lk.id: set(link_path(instance, lk)) for lk in instance.links}
    for lid in sol.link_ids:
        for s in _shadows_of(instance, lid, path_sets):
            if s in sol.link_ids:
                continue
            trial = (set(sol.link_ids) - {lid}) | {s}
            ok, _ = is_feasible(instance, trial)
            if ok:
                return False
    return True


def enumerate_shadow_minimal_optima(
    instance: Instance,
    limit: int = 1000,
    max_expansions: int = 2_000_000,
    opt: int | None = None,
) -> tuple[list[Solution], bool]:
    """All shadow-minimal optimal solutions, up to ``limit``.

    Enumerates every cover of optimal size over the full (shadow-completed)
    link set, then filters shadow-minimal ones.  Returns (solutions,
    truncated).
    """
    if opt is None:
        opt = exact_opt(instance).value
    tree = instance.tree
    edge_children = [v for v in range(tree.n) if v != tree.root]
    by_pair: dict[tuple[int, int], int] = {}
    for lk in instance.links:
        if lk.pair() not in by_pair:
            by_pair[lk.pair()] = lk.id
    cands = sorted(by_pair.values())
    cover_sets: dict[int, set[int]] = {}
    for lid in cands:
        path = link_path(instance, lid)
        cover_sets[lid] = {
            a if tree.depth[a] > tree.depth[b] else b for a, b in zip(path, path[1:])
        }
    cands_for_edge: dict[int, list[int]] = {c: [] for c in edge_children}
    for lid in cands:
        for c in cover_sets[lid]:
            cands_for_edge[c].append(lid)
    found: set[frozenset[int]] = set()
    truncated = False
    expansions = 0

    def search(chosen: set[int], counts: dict[int, int], budget: int) -> None:
        nonlocal expansions, truncated
        if truncated:
            return
        expansions += 1
        if expansions > max_expansions or len(found) >= limit * 8:
            truncated = True
            return
        open_edges = [c for c in edge_children if counts[c] == 0]
        if not open_edges:
            found.add(frozenset(chosen))
            return
        if budget <= 0:
            return
        pick = min(open_edges, key=lambda c: (len(cands_for_edge[c]), c))
        for lid in cands_for_edge[pick]:
            if lid in chosen:
                continue
            chosen.add(lid)
            for c in cover_sets[lid]:
                counts[c] += 1
            search(chosen, counts, budget - 1)
            for c in cover_sets[lid]:
                counts[c] -= 1
            chosen.discard(lid)

    search(set(), {c: 0 for c in edge_children}, opt)
    out = []
    for ids in sorted(found, key=sorted):
        if len(ids) != opt:
            continue
        sol = Solution(ids)
        if is_shadow_minimal(instance, sol):
            out.append(sol)
            if len(out) >= limit:
                truncated = True
                break
    return out, truncated
