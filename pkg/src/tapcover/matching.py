"""Weighted matching engine, leaf edge cover, and the stem rematching pass.

The engine is a blossom-method maximum-weight matching over integer weights
(Galil's formulation: S/T labels, dual adjustment, blossom shrink/expand).
The minimum-weight edge cover reduces to it by the classical gain
transformation: match edges of positive gain c(u)+c(v)-w(e), then cover
leftover vertices with their cheapest incident edge.

All weights are integer thirds; no floating point enters the accounting.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass

from .contraction import ContractionState
from .structure import GoldenTicketMap, StemRecord, TreeIndex, find_stems

AUX = -1  # auxiliary cover vertex: simulates matching a leaf to an internal node


def _run_deep(fn, depth_need: int):
    """Run fn on a thread with a large stack; blossom nesting can reach O(n)."""
    if depth_need + 100 < sys.getrecursionlimit():
        return fn()
    out: dict = {}

    def wrap():
        old = sys.getrecursionlimit()
        sys.setrecursionlimit(depth_need + 1000)
        try:
            out["value"] = fn()
        except BaseException as exc:  # re-raised on the caller's thread
            out["error"] = exc
        finally:
            sys.setrecursionlimit(old)

    old_size = threading.stack_size(512 * 1024 * 1024)
    try:
        t = threading.Thread(target=wrap)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
    if "error" in out:
        raise out["error"]
    return out["value"]


class InfeasibleCoverError(RuntimeError):
    """A required vertex has no incident edge (a leaf with no links)."""


def max_weight_matching(
    n: int,
    edges: list[tuple[int, int, int]],
    init_pairs: list[tuple[int, int]] | None = None,
    verify: bool | None = None,
) -> list[int]:
    """Maximum-weight matching in a general graph with integer weights.

    Returns mate[v] = matched partner of v, or -1.  ``init_pairs`` may seed
    the matching with a maximal set of maximum-weight edges (their zero
    slack keeps the duals feasible); anything else is rejected.

    The implementation follows the blossom method with S-/T-labels and dual
    adjustment; see Galil's survey for the vocabulary used in the comments.
    Runs in O(n^3) worst case, far less on sparse inputs with a warm start.
    The redundant optimality self-check runs by default below 1500 vertices.
    """
    if verify is None:
        verify = n <= 1500
    return _run_deep(lambda: _max_weight_matching(n, edges, init_pairs, verify), 3 * n)


def _max_weight_matching(
    n: int,
    edges: list[tuple[int, int, int]],
    init_pairs: list[tuple[int, int]] | None = None,
    verify: bool = True,
) -> list[int]:
    if not edges:
        return [-1] * n
    for (i, j, w) in edges:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad edge ({i},{j})")
        if not isinstance(w, int):
            raise ValueError("weights must be integers")

    nedge = len(edges)
    maxweight = max(max(0, w) for (_, _, w) in edges)

    # endpoint p (0..2m-1) denotes edge p//2 seen from side p%2
    endpoint = [edges[p // 2][p % 2] for p in range(2 * nedge)]
    neighbend: list[list[int]] = [[] for _ in range(n)]
    for k, (i, j, _w) in enumerate(edges):
        neighbend[i].append(2 * k + 1)
        neighbend[j].append(2 * k)

    mate = [-1] * n  # mate[v] = remote endpoint index of its matched edge
    if init_pairs:
        by_pair = {}
        for k, (i, j, w) in enumerate(edges):
            by_pair[(i, j)] = (k, w)
            by_pair[(j, i)] = (k, w)
        for (a, b) in init_pairs:
            k, w = by_pair[(a, b)]
            if w != maxweight:
                # uniform initial duals admit only globally heaviest edges
                # as tight seeds; anything else breaks dual feasibility
                raise ValueError("warm start must use maximum-weight edges only")
            if mate[a] != -1 or mate[b] != -1:
                raise ValueError("warm start is not a matching")
            i, j, _ = edges[k]
            mate[i] = 2 * k + 1
            mate[j] = 2 * k

    # label: 0 free, 1 S, 2 T (per top-level blossom); labelend: entering endpoint
    label = [0] * (2 * n)
    labelend = [-1] * (2 * n)
    inblossom = list(range(n))
    blossomparent = [-1] * (2 * n)
    blossomchilds: list[list[int] | None] = [None] * (2 * n)
    blossombase = list(range(n)) + [-1] * n
    blossomendps: list[list[int] | None] = [None] * (2 * n)
    bestedge = [-1] * (2 * n)
    blossombestedges: list[list[int] | None] = [None] * (2 * n)
    unusedblossoms = list(range(n, 2 * n))
    dualvar = [maxweight] * n + [0] * n
    allowedge = [False] * nedge
    queue: list[int] = []

    def slack(k: int) -> int:
        (i, j, wt) = edges[k]
        return dualvar[i] + dualvar[j] - 2 * wt

    def blossom_leaves(b: int):
        stack = [b]
        while stack:
            t = stack.pop()
            if t < n:
                yield t
            else:
                stack.extend(blossomchilds[t])

    def assign_label(w: int, t: int, p: int) -> None:
        b = inblossom[w]
        label[w] = label[b] = t
        labelend[w] = labelend[b] = p
        bestedge[w] = bestedge[b] = -1
        if t == 1:
            queue.extend(blossom_leaves(b))
        elif t == 2:
            base = blossombase[b]
            assign_label(endpoint[mate[base]], 1, mate[base] ^ 1)

    def scan_blossom(v: int, w: int) -> int:
        # find a new blossom's base or an augmenting path connector
        path = []
        base = -1
        while v != -1 or w != -1:
            b = inblossom[v]
            if label[b] & 4:
                base = blossombase[b]
                break
            path.append(b)
            label[b] = 5
            if labelend[b] == -1:
                v = -1
            else:
                v = endpoint[labelend[b]]
                b = inblossom[v]
                v = endpoint[labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            label[b] = 1
        return base

    def add_blossom(base: int, k: int) -> None:
        (v, w, _wt) = edges[k]
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        b = unusedblossoms.pop()
        blossombase[b] = base
        blossomparent[b] = -1
        blossomparent[bb] = b
        path: list[int] = []
        endps: list[int] = []
        while bv != bb:
            blossomparent[bv] = b
            path.append(bv)
            endps.append(labelend[bv])
            v = endpoint[labelend[bv]]
            bv = inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            blossomparent[bw] = b
            path.append(bw)
            endps.append(labelend[bw] ^ 1)
            w = endpoint[labelend[bw]]
            bw = inblossom[w]
        blossomchilds[b] = path
        blossomendps[b] = endps
        label[b] = 1
        labelend[b] = labelend[bb]
        dualvar[b] = 0
        for leaf in blossom_leaves(b):
            if label[inblossom[leaf]] == 2:
                queue.append(leaf)
            inblossom[leaf] = b
        bestedgeto = [-1] * (2 * n)
        for bv in path:
            if blossombestedges[bv] is None:
                nblists = [
                    [p // 2 for p in neighbend[leaf]] for leaf in blossom_leaves(bv)
                ]
            else:
                nblists = [blossombestedges[bv]]
            for nblist in nblists:
                for kk in nblist:
                    (i, j, _wt2) = edges[kk]
                    if inblossom[j] == b:
                        i, j = j, i
                    bj = inblossom[j]
                    if (
                        bj != b
                        and label[bj] == 1
                        and (bestedgeto[bj] == -1 or slack(kk) < slack(bestedgeto[bj]))
                    ):
                        bestedgeto[bj] = kk
            blossombestedges[bv] = None
            bestedge[bv] = -1
        blossombestedges[b] = [kk for kk in bestedgeto if kk != -1]
        bestedge[b] = -1
        for kk in blossombestedges[b]:
            if bestedge[b] == -1 or slack(kk) < slack(bestedge[b]):
                bestedge[b] = kk

    def expand_blossom(b: int, endstage: bool) -> None:
        for s in blossomchilds[b]:
            blossomparent[s] = -1
            if s < n:
                inblossom[s] = s
            elif endstage and dualvar[s] == 0:
                expand_blossom(s, endstage)
            else:
                for leaf in blossom_leaves(s):
                    inblossom[leaf] = s
        if (not endstage) and label[b] == 2:
            entrychild = inblossom[endpoint[labelend[b] ^ 1]]
            j = blossomchilds[b].index(entrychild)
            if j & 1:
                j -= len(blossomchilds[b])
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[blossomendps[b][j - endptrick] ^ endptrick ^ 1]] = 0
                assign_label(endpoint[p ^ 1], 2, p)
                allowedge[blossomendps[b][j - endptrick] // 2] = True
                j += jstep
                p = blossomendps[b][j - endptrick] ^ endptrick
                allowedge[p // 2] = True
                j += jstep
            bv = blossomchilds[b][j]
            label[endpoint[p ^ 1]] = label[bv] = 2
            labelend[endpoint[p ^ 1]] = labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while blossomchilds[b][j] != entrychild:
                bv = blossomchilds[b][j]
                if label[bv] == 1:
                    j += jstep
                    continue
                for v in blossom_leaves(bv):
                    if label[v] != 0:
                        break
                if label[v] != 0:
                    label[v] = 0
                    label[endpoint[mate[blossombase[bv]]]] = 0
                    assign_label(v, 2, labelend[v])
                j += jstep
        label[b] = labelend[b] = -1
        blossomchilds[b] = blossomendps[b] = None
        blossombase[b] = -1
        blossombestedges[b] = None
        bestedge[b] = -1
        unusedblossoms.append(b)

    def augment_blossom(b: int, v: int) -> None:
        t = v
        while blossomparent[t] != b:
            t = blossomparent[t]
        if t >= n:
            augment_blossom(t, v)
        i = j = blossomchilds[b].index(t)
        if i & 1:
            j -= len(blossomchilds[b])
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = blossomchilds[b][j]
            p = blossomendps[b][j - endptrick] ^ endptrick
            if t >= n:
                augment_blossom(t, endpoint[p])
            j += jstep
            t = blossomchilds[b][j]
            if t >= n:
                augment_blossom(t, endpoint[p ^ 1])
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        blossomchilds[b] = blossomchilds[b][i:] + blossomchilds[b][:i]
        blossomendps[b] = blossomendps[b][i:] + blossomendps[b][:i]
        blossombase[b] = blossombase[blossomchilds[b][0]]

    def augment_matching(k: int) -> None:
        (v, w, _wt) = edges[k]
        for (s, p) in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = inblossom[s]
                if bs >= n:
                    augment_blossom(bs, s)
                mate[s] = p
                if labelend[bs] == -1:
                    break
                t = endpoint[labelend[bs]]
                bt = inblossom[t]
                s = endpoint[labelend[bt]]
                j = endpoint[labelend[bt] ^ 1]
                if bt >= n:
                    augment_blossom(bt, j)
                mate[j] = labelend[bt]
                p = labelend[bt] ^ 1

    def verify_optimum() -> None:
        # complementary slackness over the final duals; integer weights only
        for v in range(n):
            assert dualvar[v] >= 0
            if mate[v] == -1:
                assert dualvar[v] == 0
        for b in range(n, 2 * n):
            if blossombase[b] >= 0:
                assert dualvar[b] >= 0
                if dualvar[b] > 0 and blossomparent[b] == -1:
                    members = set(blossom_leaves(b))
                    inside = sum(
                        1
                        for x in members
                        if mate[x] >= 0 and endpoint[mate[x]] in members
                    )
                    assert inside == len(members) - 1
        for k in range(nedge):
            (i, j, wt) = edges[k]
            s = dualvar[i] + dualvar[j] - 2 * wt
            iblossoms, jblossoms = [i], [j]
            while blossomparent[iblossoms[-1]] != -1:
                iblossoms.append(blossomparent[iblossoms[-1]])
            while blossomparent[jblossoms[-1]] != -1:
                jblossoms.append(blossomparent[jblossoms[-1]])
            iblossoms.reverse()
            jblossoms.reverse()
            for (bi, bj) in zip(iblossoms, jblossoms):
                if bi != bj:
                    break
                s += 2 * dualvar[bi]
            assert s >= 0
            if mate[i] // 2 == k or mate[j] // 2 == k:
                assert mate[i] // 2 == k and mate[j] // 2 == k
                assert s == 0

    for _stage in range(n):
        label[:] = [0] * (2 * n)
        bestedge[:] = [-1] * (2 * n)
        for b in range(n, 2 * n):
            blossombestedges[b] = None
        allowedge[:] = [False] * nedge
        queue[:] = []
        for v in range(n):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                assign_label(v, 1, -1)
        augmented = False
        while True:
            while queue and not augmented:
                v = queue.pop()
                for p in neighbend[v]:
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    if not allowedge[k]:
                        kslack = slack(k)
                        if kslack <= 0:
                            allowedge[k] = True
                    if allowedge[k]:
                        if label[inblossom[w]] == 0:
                            assign_label(w, 2, p ^ 1)
                        elif label[inblossom[w]] == 1:
                            base = scan_blossom(v, w)
                            if base >= 0:
                                add_blossom(base, k)
                            else:
                                augment_matching(k)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < slack(bestedge[b]):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break
            # dual adjustment: the smallest of the four classic bounds
            deltatype = 1
            delta = max(0, min(dualvar[:n]))
            deltaedge = deltablossom = -1
            for v in range(n):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = slack(bestedge[v])
                    if d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = bestedge[v]
            for b in range(2 * n):
                if blossomparent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = slack(bestedge[b]) // 2
                    if d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = bestedge[b]
            for b in range(n, 2 * n):
                if (
                    blossombase[b] >= 0
                    and blossomparent[b] == -1
                    and label[b] == 2
                    and dualvar[b] < delta
                ):
                    delta = dualvar[b]
                    deltatype = 4
                    deltablossom = b
            for v in range(n):
                lbl = label[inblossom[v]]
                if lbl == 1:
                    dualvar[v] -= delta
                elif lbl == 2:
                    dualvar[v] += delta
            for b in range(n, 2 * n):
                if blossombase[b] >= 0 and blossomparent[b] == -1:
                    if label[b] == 1:
                        dualvar[b] += delta
                    elif label[b] == 2:
                        dualvar[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                allowedge[deltaedge] = True
                (i, j, _wt) = edges[deltaedge]
                if label[inblossom[i]] == 0:
                    i, j = j, i
                queue.append(i)
            elif deltatype == 3:
                allowedge[deltaedge] = True
                (i, _j, _wt) = edges[deltaedge]
                queue.append(i)
            elif deltatype == 4:
                expand_blossom(deltablossom, False)
        if not augmented:
            break
        for b in range(n, 2 * n):
            if (
                blossombase[b] >= 0
                and blossomparent[b] == -1
                and label[b] == 1
                and dualvar[b] == 0
            ):
                expand_blossom(b, True)

    if verify:
        verify_optimum()
    out = [-1] * n
    for v in range(n):
        if mate[v] >= 0:
            out[v] = endpoint[mate[v]]
    return out


def _components(n: int, edges: list[tuple[int, int, int]]) -> list[list[int]]:
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (i, j, _w) in edges:
        parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for k, (i, _j, _w) in enumerate(edges):
        groups.setdefault(find(i), []).append(k)
    return list(groups.values())


def max_weight_matching_pairs(
    n: int,
    edges: list[tuple[int, int, int]],
    warm_start: bool = False,
    prefer: set[tuple[int, int]] | None = None,
) -> set[tuple[int, int]]:
    """Matched vertex pairs; solves each connected component independently.

    With ``warm_start`` a maximal greedy matching over locally-heaviest
    edges seeds each component (a big win on large near-uniform-weight
    graphs); ``prefer`` pairs are seeded first when eligible.
    """
    pairs: set[tuple[int, int]] = set()
    for comp in _components(n, edges):
        sub = [edges[k] for k in comp]
        verts = sorted({v for (i, j, _w) in sub for v in (i, j)})
        remap = {v: idx for idx, v in enumerate(verts)}
        local = [(remap[i], remap[j], w) for (i, j, w) in sub]
        init = None
        if warm_start:
            top = max(w for (_i, _j, w) in local)
            used = [False] * len(verts)
            init = []
            ordered = local
            if prefer:
                front = []
                back = []
                for e in local:
                    key = (min(verts[e[0]], verts[e[1]]), max(verts[e[0]], verts[e[1]]))
                    (front if key in prefer else back).append(e)
                ordered = front + back
            for (i, j, w) in ordered:
                if w == top and not used[i] and not used[j]:
                    used[i] = used[j] = True
                    init.append((i, j))
        mate = max_weight_matching(len(verts), local, init)
        for a, b in enumerate(mate):
            if b > a:
                pairs.add((verts[a], verts[b]))
    return pairs


@dataclass(frozen=True)
class WeightedGraph:
    """Cover graph over the current leaves plus the auxiliary vertex.

    Vertices are node ids (AUX = -1 stands for the internal side); edges
    carry integer-thirds weights and, for leaf-to-leaf edges, the current
    link id they came from.
    """

    vertices: tuple[int, ...]
    edges: tuple[tuple[int, int, int, int | None], ...]  # (u, v, weight3, link id)
    required: frozenset[int]


@dataclass(frozen=True)
class EdgeCoverResult:
    chosen: tuple[int, ...]  # edge indices
    total3: int
    matched: tuple[tuple[int, int, int], ...]  # (u, v, edge index) matching pairs
    unmatched: tuple[int, ...]  # required vertices covered only by leftover edges


def min_weight_edge_cover(graph: WeightedGraph) -> EdgeCoverResult:
    """Minimum-total-weight set of edges covering every required vertex.

    Gain transformation: c(v) is the cheapest incident weight; a maximum
    matching over positive gains c(u)+c(v)-w(e) picks the shared edges and
    every leftover vertex takes its cheapest edge (ties prefer the
    auxiliary side, then the smallest edge index).
    """
    cheapest: dict[int, int] = {}
    for idx, (u, v, w, _lid) in enumerate(graph.edges):
        for x in (u, v):
            if x not in cheapest or _cover_key(graph, idx) < _cover_key(graph, cheapest[x]):
                cheapest[x] = idx
    for v in graph.required:
        if v not in cheapest:
            raise InfeasibleCoverError(f"vertex {v} has no incident edge")

    req = sorted(graph.required)
    remap = {v: i for i, v in enumerate(req)}
    gain_edges: list[tuple[int, int, int]] = []
    gain_index: dict[tuple[int, int], int] = {}
    for idx, (u, v, w, _lid) in enumerate(graph.edges):
        if u in remap and v in remap:
            cu = graph.edges[cheapest[u]][2]
            cv = graph.edges[cheapest[v]][2]
            g = cu + cv - w
            if g > 0:
                a, b = remap[u], remap[v]
                key = (min(a, b), max(a, b))
                if key not in gain_index or g > gain_edges[gain_index[key]][2]:
                    if key in gain_index:
                        gain_edges[gain_index[key]] = (a, b, g)
                    else:
                        gain_index[key] = len(gain_edges)
                        gain_edges.append((a, b, g))
    big = len(req) > 400
    matched_pairs = max_weight_matching_pairs(len(req), gain_edges, warm_start=big)

    # map matched index pairs back to concrete edges (cheapest edge per pair)
    edge_by_pair: dict[tuple[int, int], int] = {}
    for idx, (u, v, w, _lid) in enumerate(graph.edges):
        if u in remap and v in remap:
            key = (min(u, v), max(u, v))
            if key not in edge_by_pair or (w, idx) < (
                graph.edges[edge_by_pair[key]][2],
                edge_by_pair[key],
            ):
                edge_by_pair[key] = idx
    chosen: list[int] = []
    matched: list[tuple[int, int, int]] = []
    covered: set[int] = set()
    for (a, b) in sorted(matched_pairs):
        u, v = req[a], req[b]
        idx = edge_by_pair[(min(u, v), max(u, v))]
        chosen.append(idx)
        matched.append((u, v, idx))
        covered.update((u, v))
    unmatched: list[int] = []
    for v in req:
        if v in covered:
            continue
        idx = cheapest[v]
        if idx not in chosen:
            chosen.append(idx)
        unmatched.append(v)
    total = sum(graph.edges[idx][2] for idx in set(chosen))
    return EdgeCoverResult(tuple(sorted(set(chosen))), total, tuple(matched), tuple(unmatched))


def _cover_key(graph: WeightedGraph, idx: int) -> tuple[int, int, int]:
    u, v, w, _lid = graph.edges[idx]
    prefer_aux = 0 if (u == AUX or v == AUX) else 1
    return (w, prefer_aux, idx)


def leaf_cover_graph(
    state: ContractionState,
    gtm: GoldenTicketMap,
    idx: TreeIndex | None = None,
    cheap_nodes: frozenset[int] = frozenset(),
) -> WeightedGraph:
    """Cover graph: current leaves, leaf-to-leaf links, auxiliary edges.

    Every leaf with at least one incident current link gets an auxiliary
    edge of weight 3 (one unit): any such leaf can always fall back to an
    up-link toward the internal side.  Leaf-to-leaf links weigh 4+gt in
    thirds; parallel pairs collapse to the cheapest.  Links touching
    ``cheap_nodes`` (rematched stem compounds) weigh 3.
    """
    idx = idx or TreeIndex(state)
    leaves = set(idx.leaves)
    edges: list[tuple[int, int, int, int | None]] = []
    best_ll: dict[tuple[int, int], tuple[int, int]] = {}
    for lid in sorted(state.cur_links):
        u, v = state.cur_links[lid]
        if u in leaves and v in leaves:
            # a usable matching touches only original leaves; compound
            # leaves fall back to their up-link (the auxiliary side), except
            # for freshly rematched stem compounds, which pair at one unit
            if (state.compound[u] and u not in cheap_nodes) or (
                state.compound[v] and v not in cheap_nodes
            ):
                continue
            if u in cheap_nodes or v in cheap_nodes:
                w = 3
            else:
                w = gtm.weight3(lid)
            key = (min(u, v), max(u, v))
            if key not in best_ll or (w, lid) < best_ll[key]:
                best_ll[key] = (w, lid)
    for (u, v), (w, lid) in sorted(best_ll.items()):
        edges.append((u, v, w, lid))
    for leaf in idx.leaves:
        if state.links_at(leaf):
            edges.append((leaf, AUX, 3, None))
    verts = tuple(idx.leaves) + (AUX,)
    return WeightedGraph(verts, tuple(edges), frozenset(idx.leaves))


@dataclass(frozen=True)
class StemMatchingResult:
    """Usable matching produced by the rematching pass.

    ``forced_groups`` lists sets of matched links whose joint contraction
    would create a new leaf (a multi-pair stem): no rematch pays for those,
    so the caller contracts them outright, funded by the pairs themselves.
    """

    matching: tuple[int, ...]  # link ids: plain leaf pairs plus stem pairing links
    stem_pairs: tuple[tuple[int, int, int], ...]  # (stem node, partner, link id)
    # per group: (link ids, (link id, credit tag) pairs); tag -1 marks a
    # stem pairing link carrying one unit, else the link's certified credit
    forced_groups: tuple[tuple[tuple[int, ...], tuple[tuple[int, int], ...]], ...]
    unmatched: tuple[int, ...]
    weight3_before: int
    weight3_after: int
    rounds: int


def stem_matching(
    state: ContractionState,
    cover: EdgeCoverResult,
    gtm: GoldenTicketMap,
    stems: list[StemRecord] | None = None,
    idx: TreeIndex | None = None,
) -> StemMatchingResult:
    """Turn an edge cover's matching into a usable one.

    While the matching activates a twin link (or a group of pairs whose
    joint contraction would create a new leaf), contract those pairs on a
    scratch tree, price every link at the new compound at one unit, and
    recompute the cover with the compound constrained to a single cover
    edge.  The compound either pairs with a reachable leaf (a stem pair) or
    falls back to the auxiliary side and the original pair dissolves.
    Total weight never increases.
    """
    idx = idx or TreeIndex(state)
    if stems is None:
        stems = find_stems(state, idx)
    twin_stem = {r.twin: r.stem for r in stems}

    def cover_links(res: EdgeCoverResult, graph: WeightedGraph) -> list[int]:
        return [graph.edges[e][3] for (_u, _v, e) in res.matched if graph.edges[e][3] is not None]

    graph = leaf_cover_graph(state, gtm, idx)
    matching = cover_links(cover, graph)
    before = cover.total3
    current_total = cover.total3
    scratch = state.copy()
    cheap_twin: set[int] = set()
    cheap_forced: set[int] = set()
    forced_groups: list[tuple[tuple[int, ...], tuple[tuple[int, int], ...]]] = []
    rounds = 0
    base_leaves = state.current_leaves()
    pair_by_nodes = {lid: set(state.cur_links[lid]) for lid in state.cur_links}

    def resolve() -> None:
        nonlocal matching, current_total, rounds
        rounds += 1
        sidx = TreeIndex(scratch)
        cheap = frozenset(cheap_twin | cheap_forced)
        sgraph = leaf_cover_graph(scratch, gtm, sidx, cheap_nodes=cheap)
        res = min_weight_edge_cover(sgraph)
        for t in cheap:
            deg = sum(1 for (u, v, _e) in res.matched if t in (u, v))
            assert deg <= 1
        matching = cover_links(res, sgraph)
        current_total = res.total3

    while rounds <= len(state.cur_links) + 4:
        activated = [
            lid
            for lid in sorted(matching)
            if lid in twin_stem and lid in scratch.cur_links
        ]
        if activated:
            reps = scratch.contract_links(activated)
            cheap_twin.update(reps)
            resolve()
            continue
        # multi-pair groups whose joint contraction would create a new leaf:
        # no rematch pays for these, so their links become forced choices
        sim = state.copy()
        live = [lid for lid in matching if lid in state.cur_links]
        if live:
            sim.contract_links(live)
        newleaves = sim.current_leaves() - base_leaves
        newleaves -= {sim.find(t) for t in cheap_twin | cheap_forced}
        if not newleaves:
            break
        group_links: list[int] = []
        for t in sorted(newleaves):
            group = [
                lid
                for lid in sorted(live)
                if lid in scratch.cur_links
                and all(idx.in_subtree(t, x) for x in pair_by_nodes[lid])
            ]
            if not group:
                continue
            tags = []
            for lid in group:
                su, sv = scratch.cur_links[lid]
                if su in cheap_twin or sv in cheap_twin:
                    tags.append((lid, -1))
                else:
                    tags.append((lid, gtm.value(lid)))
            forced_groups.append((tuple(group), tuple(tags)))
            group_links.extend(group)
        if not group_links:
            break
        reps = scratch.contract_links(group_links)
        cheap_forced.update(reps)
        resolve()

    # express the final matching on the original current tree
    pair_of: dict[tuple[int, int], int] = {}
    for lid, (u, v) in state.cur_links.items():
        key = (min(u, v), max(u, v))
        pair_of[key] = min(lid, pair_of.get(key, lid))
    plain: list[int] = []
    stem_pairs: list[tuple[int, int, int]] = []
    raw_pairs: list[tuple[int, int, int]] = []
    dropped = 0
    for lid in sorted(matching):
        u, v = scratch.cur_links[lid]
        if u in cheap_forced or v in cheap_forced:
            dropped += 1  # the forced compound stays unmatched
        elif u in cheap_twin or v in cheap_twin:
            stem_node = u if u in cheap_twin else v
            partner = v if u in cheap_twin else u
            # prefer the materialized link ending at the stem itself
            key = (min(partner, stem_node), max(partner, stem_node))
            stem_pairs.append((stem_node, partner, pair_of.get(key, lid)))
            raw_pairs.append((stem_node, partner, lid))
        else:
            plain.append(lid)
    current_total += 3 * dropped
    assert current_total <= before

    final = sorted(set(plain + [p[2] for p in stem_pairs]))
    if stem_pairs and not is_usable(state, final):
        # fall back to the unsubstituted pairing links (they contract a
        # superset of the shadow's path)
        alt = sorted(set(plain + [p[2] for p in raw_pairs]))
        if is_usable(state, alt):
            stem_pairs = raw_pairs
            final = alt
    final_t = tuple(final)
    used = {x for lid in final_t for x in state.cur_links[lid]}
    unmatched = tuple(x for x in sorted(base_leaves) if x not in used)
    return StemMatchingResult(
        final_t,
        tuple(stem_pairs),
        tuple(forced_groups),
        unmatched,
        before,
        current_total,
        rounds,
    )


def is_usable(state: ContractionState, matching) -> bool:
    """True iff contracting the matching creates no new leaves and no link
    of it touches a compound node."""
    ids = sorted(set(matching))
    for lid in ids:
        u, v = state.cur_links[lid]
        if state.compound[u] or state.compound[v]:
            return False
    if not ids:
        return True
    sim = state.copy()
    before = state.current_leaves()
    sim.contract_links(ids)
    return not (sim.current_leaves() - before)
