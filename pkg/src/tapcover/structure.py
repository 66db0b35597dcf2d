"""Structural analysis on the current tree.

Closedness tests, minimally leaf-closed subtrees, up-links, stems and twin
links, certified-credit detection on twin links, and semi-closed subtrees
with respect to a matching.  All functions are pure queries over a state
snapshot.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass, field

from .contraction import ContractionState
from .instance import InstanceError


@dataclass(frozen=True)
class StemRecord:
    """An internal node turned into a leaf by contracting its twin link."""

    stem: int
    twin: int
    activated: bool = False


@dataclass
class GoldenTicketMap:
    """Per-link certified credit in {0,1,2} plus witness subtrees.

    A twin link certifies one extra third of lower-bound credit; links whose
    enclosing subtree matches one of the three certified shapes get two.
    Link weight for the leaf cover is stored in integer thirds:
    weight3(e) = 4 + gt(e).
    """

    gt: dict[int, int] = field(default_factory=dict)
    # (root, shape tag 'A'|'B'|'C', links credited, subtree node set)
    witnesses: list[tuple[int, str, tuple[int, ...], frozenset[int]]] = field(default_factory=list)

    def value(self, link_id: int) -> int:
        return self.gt.get(link_id, 0)

    def weight3(self, link_id: int) -> int:
        return 4 + self.value(link_id)


@dataclass(frozen=True)
class SemiClosedTree:
    """A subtree respecting a matching whose contraction is minimally leaf-closed."""

    root: int
    leaves: frozenset[int]
    matched: tuple[int, ...]  # link ids of matching pairs inside the subtree
    unmatched: frozenset[int]
    stems: tuple[StemRecord, ...] = ()


class TreeIndex:
    """Preorder index of a current tree: depths, intervals, leaf statistics."""

    def __init__(self, state: ContractionState):
        self.state = state
        root = state.current_root()
        self.root = root
        n = state.base.n
        self.tin = [-1] * n
        self.tout = [-1] * n
        self.depth = [-1] * n
        self.order: list[int] = []
        self.leafcount = [0] * n
        self.size = [0] * n
        timer = 0
        stack: list[tuple[int, bool]] = [(root, False)]
        self.depth[root] = 0
        while stack:
            v, done = stack.pop()
            if done:
                self.tout[v] = timer
                for c in state.cur_children[v]:
                    self.leafcount[v] += self.leafcount[c]
                    self.size[v] += self.size[c]
                self.size[v] += 1
                if not state.cur_children[v] and v != root:
                    self.leafcount[v] = 1
                continue
            self.tin[v] = timer
            timer += 1
            self.order.append(v)
            stack.append((v, True))
            for c in sorted(state.cur_children[v], reverse=True):
                self.depth[c] = self.depth[v] + 1
                stack.append((c, False))
        self.leaves = sorted(state.current_leaves())
        self._lift: list[list[int]] | None = None

    def in_subtree(self, v: int, x: int) -> bool:
        return self.tin[v] <= self.tin[x] and self.tout[x] <= self.tout[v]

    def _build_lift(self) -> list[list[int]]:
        if self._lift is None:
            par = self.state.cur_parent
            up0 = [par[v] if v != self.root else v for v in range(len(self.tin))]
            tables = [up0]
            k = 1
            while (1 << k) <= max(1, max((self.depth[v] for v in self.order), default=0)):
                prev = tables[-1]
                tables.append([prev[prev[v]] if self.tin[v] >= 0 else v for v in range(len(prev))])
                k += 1
            self._lift = tables
        return self._lift

    def lca(self, u: int, v: int) -> int:
        if self.in_subtree(u, v):
            return u
        if self.in_subtree(v, u):
            return v
        tables = self._build_lift()
        for table in reversed(tables):
            if not self.in_subtree(table[u], v):
                u = table[u]
        return self.state.cur_parent[u]


def build_index(state: ContractionState) -> TreeIndex:
    return TreeIndex(state)


def is_node_closed(state: ContractionState, v: int, x: int) -> bool:
    """True iff every current link at x has its other endpoint inside T_v."""
    idx = TreeIndex(state)
    if not idx.in_subtree(v, x):
        raise InstanceError(f"node {x} is not in the subtree of {v}")
    for lid in state.links_at(x):
        a, b = state.cur_links[lid]
        other = b if a == x else a
        if not idx.in_subtree(v, other):
            return False
    return True


def _leaf_up(state: ContractionState, idx: TreeIndex, leaf: int) -> tuple[int, int] | None:
    """(up-node depth, link id) of the highest-reaching link at a leaf."""
    best: tuple[int, int] | None = None
    for lid in sorted(state.links_at(leaf)):
        a, b = state.cur_links[lid]
        other = b if a == leaf else a
        d = idx.depth[idx.lca(leaf, other)]
        if best is None or d < best[0]:
            best = (d, lid)
    return best


def up_link(state: ContractionState, leaf: int, idx: TreeIndex | None = None) -> int:
    """The incident link whose lca with the leaf is closest to the root.

    Ties break toward the smallest link id.  A leaf with no incident link
    makes the instance infeasible and raises.
    """
    idx = idx or TreeIndex(state)
    best = _leaf_up(state, idx, leaf)
    if best is None:
        raise InstanceError(f"leaf {leaf} has no incident link (instance infeasible)")
    return best[1]


def _leaf_tops(state: ContractionState, idx: TreeIndex) -> dict[int, int]:
    """Per-leaf depth of its up node (+inf sentinel when linkless)."""
    tops: dict[int, int] = {}
    for leaf in idx.leaves:
        best = _leaf_up(state, idx, leaf)
        tops[leaf] = best[0] if best is not None else len(idx.order) + 1
    return tops


def _subtree_min_top(state: ContractionState, idx: TreeIndex, tops: dict[int, int]) -> list[int]:
    """min over leaves in each subtree of the leaf's up-node depth."""
    big = len(idx.order) + 2
    m = [big] * state.base.n
    for v in reversed(idx.order):
        if v in tops:
            m[v] = tops[v]
        for c in state.cur_children[v]:
            if m[c] < m[v]:
                m[v] = m[c]
    return m


def minimally_leaf_closed(state: ContractionState, idx: TreeIndex | None = None) -> int:
    """Root of a minimally leaf-closed subtree: deepest first, then smallest id.

    T_v is leaf-closed when no leaf in T_v has a link leaving it; the full
    tree always qualifies, so the deepest qualifying root is minimal.
    """
    idx = idx or TreeIndex(state)
    tops = _leaf_tops(state, idx)
    m = _subtree_min_top(state, idx, tops)
    best: tuple[int, int] | None = None
    for v in idx.order:
        if v != idx.root and idx.leafcount[v] == 0:
            continue
        if m[v] >= idx.depth[v]:
            key = (-idx.depth[v], v)
            if best is None or key < best:
                best = key
    if best is None:
        return idx.root
    return best[1]


def find_stems(state: ContractionState, idx: TreeIndex | None = None, matching=frozenset()) -> list[StemRecord]:
    """All (stem, twin link) pairs in the current view.

    A link is a twin when the subtree of its endpoints' lca consists exactly
    of the link's path, so contracting it strips the lca of all children.
    This matches simulating the contraction and diffing leaf sets.
    """
    idx = idx or TreeIndex(state)
    matching = set(matching)
    out: list[StemRecord] = []
    for lid in sorted(state.cur_links):
        u, v = state.cur_links[lid]
        s = idx.lca(u, v)
        if s == idx.root:
            continue
        plen = idx.depth[u] + idx.depth[v] - 2 * idx.depth[s] + 1
        if idx.size[s] == plen:
            out.append(StemRecord(s, lid, lid in matching))
    return out


def _path_set(state: ContractionState, lid: int) -> set[int]:
    return set(state.current_path(lid))


def golden_tickets(
    state: ContractionState,
    stems: list[StemRecord] | None = None,
    idx: TreeIndex | None = None,
) -> GoldenTicketMap:
    """Certified-credit values for every current link.

    Twin links certify one unit; a twin (or, in the stemless shape, a plain
    leaf-to-leaf link) inside a matching witness subtree certifies two.
    Witness subtrees are maximal for containment, hence node-disjoint.
    Values are capped at 2.
    """
    idx = idx or TreeIndex(state)
    if stems is None:
        stems = find_stems(state, idx)
    gtm = GoldenTicketMap()
    for rec in stems:
        gtm.gt[rec.twin] = max(gtm.gt.get(rec.twin, 0), 1)

    tops = _leaf_tops(state, idx)
    leaves = set(idx.leaves)
    # leaf-leaf current links, and per-node twin/stem and inside-link tallies
    ll_links = {
        lid: pair
        for lid, pair in state.cur_links.items()
        if pair[0] in leaves and pair[1] in leaves
    }
    ll_by_pair: dict[tuple[int, int], int] = {}
    for lid in sorted(ll_links):
        u, v = ll_links[lid]
        ll_by_pair.setdefault((min(u, v), max(u, v)), lid)
    stem_sub = [0] * state.base.n
    stem_any = [-1] * state.base.n
    for rec in stems:
        stem_sub[rec.stem] += 1
        stem_any[rec.stem] = rec.twin
    ll_lca_cnt = [0] * state.base.n
    ll_lca: dict[int, int] = {}
    for lid in sorted(ll_links):
        u, v = ll_links[lid]
        w = idx.lca(u, v)
        ll_lca[lid] = w
        ll_lca_cnt[w] += 1
    ll_sub = list(ll_lca_cnt)
    # three lowest leaf reaches per subtree: enough to test closedness of
    # every leaf except two excluded ones in O(1)
    top3: list[list[tuple[int, int]]] = [[] for _ in range(state.base.n)]
    for v in reversed(idx.order):
        entries = []
        if not state.cur_children[v] and v != idx.root:
            entries.append((tops[v], v))
        for c in state.cur_children[v]:
            stem_sub[v] += stem_sub[c]
            ll_sub[v] += ll_sub[c]
            if stem_any[v] == -1 and stem_any[c] != -1:
                stem_any[v] = stem_any[c]
            entries.extend(top3[c])
        entries.sort()
        top3[v] = entries[:3]

    def closed_in(leaf: int, v: int) -> bool:
        return tops[leaf] >= idx.depth[v]

    def others_closed(v: int, ex1: int, ex2: int) -> bool:
        for t, leaf in top3[v]:
            if leaf != ex1 and leaf != ex2:
                return t >= idx.depth[v]
        return True

    # per relevant leaf: sorted lca depths of its leaf-to-leaf links
    ll_depths_at: dict[int, list[int]] = {}

    def ll_at_in(x: int, v: int) -> int:
        if x not in ll_depths_at:
            ds = sorted(
                idx.depth[ll_lca[lid]] for lid in state.links_at(x) if lid in ll_lca
            )
            ll_depths_at[x] = ds
        ds = ll_depths_at[x]
        # lcas of links at x are ancestors of x: inside T_v iff deep enough
        return len(ds) - bisect.bisect_left(ds, idx.depth[v])

    candidates: list[tuple[int, str, tuple[int, ...]]] = []

    # three-leaf chain tops: highest v whose subtree has exactly 3 leaves
    for v in idx.order:
        if v == idx.root or idx.leafcount[v] != 3:
            continue
        p = state.cur_parent[v]
        if p != idx.root and idx.leafcount[p] == 3:
            continue
        trio = [leaf for (_t, leaf) in top3[v]]
        if stem_sub[v] >= 1:
            if stem_sub[v] > 1:
                continue
            twin = stem_any[v]
            tu, tv = state.cur_links[twin]
            if tu not in leaves or tv not in leaves:
                continue
            if state.compound[tu] or state.compound[tv]:
                continue
            rest = [x for x in trio if x not in (tu, tv)]
            if len(rest) != 1:
                continue
            if closed_in(rest[0], v):
                candidates.append((v, "A", (twin,)))
        else:
            credited: list[int] = []
            for x, y in itertools.combinations(sorted(trio), 2):
                lid = ll_by_pair.get((x, y))
                if lid is None:
                    continue
                if state.compound[x] or state.compound[y]:
                    continue
                rest = [z for z in trio if z not in (x, y)]
                if closed_in(rest[0], v):
                    credited.append(lid)
            if credited:
                candidates.append((v, "B", tuple(sorted(credited))))

    # single-twin wide shape: walk ancestors of each stem
    for rec in stems:
        tu, tv = state.cur_links[rec.twin]
        if tu not in leaves or tv not in leaves:
            continue
        if state.compound[tu] or state.compound[tv]:
            continue
        best_v = None
        v = state.cur_parent[rec.stem]
        while v != idx.root:
            if stem_sub[v] > 1:
                break
            if idx.leafcount[v] >= 4 and others_closed(v, tu, tv):
                # the twin itself is double-subtracted below, hence the +1
                inside_not_ab = ll_sub[v] - ll_at_in(tu, v) - ll_at_in(tv, v) + 1
                if inside_not_ab == 0:
                    best_v = v
            v = state.cur_parent[v]
        if best_v is not None:
            candidates.append((best_v, "C", (rec.twin,)))

    # keep containment-maximal witnesses; nested candidates are dropped
    candidates.sort(key=lambda c: (idx.depth[c[0]], idx.tin[c[0]]))
    taken: list[int] = []
    for v, tag, links in candidates:
        if any(idx.in_subtree(t, v) for t in taken):
            continue
        taken.append(v)
        nodes = frozenset(x for x in idx.order if idx.in_subtree(v, x))
        gtm.witnesses.append((v, tag, links, nodes))
        for lid in links:
            gtm.gt[lid] = 2
    return gtm


def semi_closed_subtree(
    state: ContractionState,
    matching,
    stems: list[StemRecord] | None = None,
) -> SemiClosedTree:
    """Deepest subtree respecting the matching whose contraction is minimally leaf-closed."""
    sct, _scratch, _sidx = _semi_closed_with_scratch(state, matching, stems)
    return sct


def _semi_closed_with_scratch(
    state: ContractionState,
    matching,
    stems: list[StemRecord] | None = None,
):
    matching = sorted(set(matching))
    scratch = state.copy()
    if matching:
        scratch.contract_links(matching)
    sidx = TreeIndex(scratch)
    v = minimally_leaf_closed(scratch, sidx)
    idx = TreeIndex(state)
    # v is a live node of the original state (group tops are kept)
    lo, hi = idx.tin[v], idx.tout[v]
    leaves_v = frozenset(x for x in idx.leaves if lo <= idx.tin[x] < hi)
    matched_in: list[int] = []
    for lid in matching:
        a, b = state.cur_links[lid]
        ina, inb = idx.in_subtree(v, a), idx.in_subtree(v, b)
        if ina != inb:
            raise InstanceError(f"matching link {lid} is split by subtree {v}")
        if ina:
            matched_in.append(lid)
    used = {e for lid in matched_in for e in state.cur_links[lid]}
    unmatched = frozenset(x for x in leaves_v if x not in used)
    stems = stems if stems is not None else find_stems(state, idx)
    inside = tuple(r for r in stems if idx.in_subtree(v, r.stem))
    sct = SemiClosedTree(v, leaves_v, tuple(matched_in), unmatched, inside)
    return sct, scratch, sidx
