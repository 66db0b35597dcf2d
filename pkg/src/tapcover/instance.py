"""Problem representation: rooted tree, links, paths, shadows, feasibility.

An instance is a rooted tree plus a multiset of candidate links. Choosing a
link covers every tree edge on the tree path between its endpoints; a
solution is feasible when every tree edge is covered.  Nodes are dense
integer ids 0..n-1 (external names are mapped at parse time).
"""

from __future__ import annotations

from dataclasses import dataclass, field


class InstanceError(ValueError):
    """Malformed tree, link, or instance text."""


class InfeasibleInstanceError(RuntimeError):
    """The link set cannot cover every tree edge."""


@dataclass(frozen=True)
class Link:
    """A candidate extra edge between two tree nodes.

    ``origins`` lists the original link ids this link is a shadow of
    (empty for links present in the raw input).
    """

    id: int
    u: int
    v: int
    origins: tuple[int, ...] = ()

    @property
    def is_shadow(self) -> bool:
        return bool(self.origins)

    def pair(self) -> tuple[int, int]:
        return (self.u, self.v) if self.u <= self.v else (self.v, self.u)


class RootedTree:
    """Rooted tree over nodes 0..n-1 with parent map and depths.

    The root's parent is itself.  Construction validates connectivity and
    acyclicity (exactly n-1 parent edges reaching every node).
    """

    __slots__ = ("n", "root", "parent", "children", "depth")

    def __init__(self, n: int, root: int, parent: list[int]):
        if not (0 <= root < n):
            raise InstanceError(f"root {root} out of range for n={n}")
        if len(parent) != n:
            raise InstanceError("parent map must cover every node")
        if parent[root] != root:
            raise InstanceError("root must be its own parent")
        self.n = n
        self.root = root
        self.parent = parent
        self.children: list[list[int]] = [[] for _ in range(n)]
        for v in range(n):
            p = parent[v]
            if not (0 <= p < n):
                raise InstanceError(f"parent of {v} out of range")
            if v != root:
                self.children[p].append(v)
        # Depths via BFS from the root; any unreached node means a cycle or
        # disconnected edge list.
        self.depth = [-1] * n
        self.depth[root] = 0
        stack = [root]
        seen = 1
        while stack:
            u = stack.pop()
            for c in self.children[u]:
                self.depth[c] = self.depth[u] + 1
                seen += 1
                stack.append(c)
        if seen != n:
            raise InstanceError("edges do not form a tree rooted at root (cycle or disconnected)")

    def is_leaf(self, v: int) -> bool:
        return not self.children[v] and v != self.root

    def leaves(self) -> list[int]:
        return [v for v in range(self.n) if self.is_leaf(v)]


@dataclass(frozen=True)
class Instance:
    """A rooted tree together with an indexed link collection."""

    tree: RootedTree
    links: tuple[Link, ...]
    shadow_completed: bool = False
    links_at: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    def link(self, link_id: int) -> Link:
        if not (0 <= link_id < len(self.links)):
            raise InstanceError(f"unknown link id {link_id}")
        return self.links[link_id]

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def m(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class Solution:
    """A set of chosen link ids."""

    link_ids: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.link_ids)


def _index_links(tree: RootedTree, links: list[Link]) -> tuple[tuple[int, ...], ...]:
    at: list[list[int]] = [[] for _ in range(tree.n)]
    for lk in links:
        at[lk.u].append(lk.id)
        at[lk.v].append(lk.id)
    return tuple(tuple(a) for a in at)


def build_instance(
    edges: list[tuple[int, int]],
    root: int,
    links: list[tuple[int, int]],
) -> Instance:
    """Build an instance from (parent, child) edges and (u, v) link pairs.

    Parallel original links (same unordered pair) are deduplicated; the
    optimum is unaffected.  Self-loop links and ids outside 0..n-1 are
    rejected.
    """
    nodes = {root}
    for p, c in edges:
        nodes.add(p)
        nodes.add(c)
    n = max(nodes) + 1 if nodes else 1
    if nodes != set(range(n)):
        raise InstanceError("node ids must be dense integers 0..n-1")
    parent = [-1] * n
    parent[root] = root
    for p, c in edges:
        if c == root:
            raise InstanceError("root cannot be a child")
        if parent[c] != -1:
            raise InstanceError(f"node {c} has two parents (cycle or multi-edge)")
        parent[c] = p
    if any(p == -1 for p in parent):
        raise InstanceError("some node has no parent edge")
    tree = RootedTree(n, root, parent)

    out: list[Link] = []
    seen: set[tuple[int, int]] = set()
    for u, v in links:
        if not (0 <= u < n and 0 <= v < n):
            raise InstanceError(f"link ({u},{v}) references unknown node")
        if u == v:
            raise InstanceError(f"self-loop link at node {u}")
        key = (u, v) if u <= v else (v, u)
        if key in seen:
            continue
        seen.add(key)
        out.append(Link(len(out), u, v))
    links_t = tuple(out)
    return Instance(tree, links_t, False, _index_links(tree, list(links_t)))


def lca(instance: Instance, u: int, v: int) -> int:
    """Least common ancestor via upward walk with depth equalization."""
    tree = instance.tree
    if not (0 <= u < tree.n and 0 <= v < tree.n):
        raise InstanceError(f"node id out of range: {u}, {v}")
    du, dv = tree.depth[u], tree.depth[v]
    while du > dv:
        u = tree.parent[u]
        du -= 1
    while dv > du:
        v = tree.parent[v]
        dv -= 1
    while u != v:
        u = tree.parent[u]
        v = tree.parent[v]
    return u


def link_path(instance: Instance, link: Link | int) -> list[int]:
    """Node sequence u..lca..v; covered tree edges are consecutive pairs."""
    if isinstance(link, int):
        link = instance.link(link)
    tree = instance.tree
    u, v = link.u, link.v
    up: list[int] = [u]
    vp: list[int] = [v]
    du, dv = tree.depth[u], tree.depth[v]
    while du > dv:
        u = tree.parent[u]
        up.append(u)
        du -= 1
    while dv > du:
        v = tree.parent[v]
        vp.append(v)
        dv -= 1
    while u != v:
        u = tree.parent[u]
        v = tree.parent[v]
        up.append(u)
        vp.append(v)
    vp.pop()
    return up + vp[::-1]


def shadow_complete(instance: Instance) -> Instance:
    """Materialize every strict subpath of every link as a shadow link.

    Shadows are deduplicated by unordered endpoint pair; each kept link
    records the original links it arose from.  Idempotent, and the exact
    optimum is unchanged (a shadow can always be replaced by its origin).
    """
    tree = instance.tree
    by_pair: dict[tuple[int, int], tuple[int, int, list[int]]] = {}
    for lk in instance.links:
        key = lk.pair()
        if key not in by_pair:
            by_pair[key] = (lk.u, lk.v, list(lk.origins))
    order: list[tuple[int, int]] = [lk.pair() for lk in instance.links]
    for lk in instance.links:
        origin = lk.origins[0] if lk.origins else lk.id
        path = link_path(instance, lk)
        k = len(path)
        for i in range(k):
            for j in range(i + 1, k):
                if i == 0 and j == k - 1:
                    continue
                a, b = path[i], path[j]
                key = (a, b) if a <= b else (b, a)
                if key in by_pair:
                    origins = by_pair[key][2]
                    if origin not in origins:
                        origins.append(origin)
                else:
                    by_pair[key] = (a, b, [origin])
                    order.append(key)
    # Pairs present in the input keep their tags (an original stays original
    # even if it is also a subpath of some other link); shadow-only pairs
    # carry the provenance list.
    raw = {lk.pair(): lk.origins for lk in instance.links}
    out: list[Link] = []
    for key in order:
        u, v, origins = by_pair[key]
        origins_t = raw[key] if key in raw else tuple(sorted(origins))
        out.append(Link(len(out), u, v, origins_t))
    links_t = tuple(out)
    return Instance(tree, links_t, True, _index_links(tree, list(links_t)))


def is_feasible(instance: Instance, chosen: Solution | frozenset[int] | set[int]) -> tuple[bool, dict[int, int]]:
    """Check that every tree edge lies on the path of some chosen link.

    Returns (ok, witness) where the witness maps each covered tree edge
    (keyed by child node id) to one covering link id.
    """
    ids = chosen.link_ids if isinstance(chosen, Solution) else chosen
    tree = instance.tree
    witness: dict[int, int] = {}
    for lid in sorted(ids):
        lk = instance.link(lid)
        path = link_path(instance, lk)
        for a, b in zip(path, path[1:]):
            child = a if tree.depth[a] > tree.depth[b] else b
            witness.setdefault(child, lid)
    ok = all(v in witness for v in range(tree.n) if v != tree.root)
    return ok, witness


def covers_all_edges(instance: Instance, ids) -> bool:
    """Fast feasibility test without a witness; stops once everything is hit."""
    tree = instance.tree
    parent, depth = tree.parent, tree.depth
    covered = bytearray(tree.n)
    remaining = tree.n - 1
    for lid in ids:
        lk = instance.links[lid]
        u, v = lk.u, lk.v
        du, dv = depth[u], depth[v]
        while du > dv:
            if not covered[u]:
                covered[u] = 1
                remaining -= 1
            u = parent[u]
            du -= 1
        while dv > du:
            if not covered[v]:
                covered[v] = 1
                remaining -= 1
            v = parent[v]
            dv -= 1
        while u != v:
            if not covered[u]:
                covered[u] = 1
                remaining -= 1
            if not covered[v]:
                covered[v] = 1
                remaining -= 1
            u = parent[u]
            v = parent[v]
        if remaining == 0:
            return True
    return remaining == 0


def serialize(instance: Instance) -> str:
    """Canonical text form: header, nodes line, edges by child id, sorted links."""
    tree = instance.tree
    lines = ["tap 1", f"nodes {tree.n} root {tree.root}"]
    for v in range(tree.n):
        if v != tree.root:
            lines.append(f"edge {tree.parent[v]} {v}")
    for pair in sorted(lk.pair() for lk in instance.links):
        lines.append(f"link {pair[0]} {pair[1]}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> Instance:
    """Parse the line-oriented instance format produced by :func:`serialize`."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0].split() != ["tap", "1"]:
        raise InstanceError("line 1: expected header 'tap 1'")
    if len(lines) < 2:
        raise InstanceError("line 2: missing 'nodes <n> root <r>' line")
    head = lines[1].split()
    if len(head) != 4 or head[0] != "nodes" or head[2] != "root":
        raise InstanceError("line 2: expected 'nodes <n> root <r>'")
    try:
        n, root = int(head[1]), int(head[3])
    except ValueError as exc:
        raise InstanceError(f"line 2: bad integer ({exc})") from exc
    edges: list[tuple[int, int]] = []
    links: list[tuple[int, int]] = []
    for idx, ln in enumerate(lines[2:], start=3):
        parts = ln.split()
        if len(parts) != 3 or parts[0] not in ("edge", "link"):
            raise InstanceError(f"line {idx}: expected 'edge <p> <c>' or 'link <u> <v>'")
        try:
            a, b = int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise InstanceError(f"line {idx}: bad integer ({exc})") from exc
        if parts[0] == "edge":
            edges.append((a, b))
        else:
            links.append((a, b))
    if len(edges) != n - 1:
        raise InstanceError(f"expected {n - 1} edges for n={n}, got {len(edges)}")
    return build_instance(edges, root, links)


def serialize_solution(instance: Instance, sol: Solution) -> str:
    """Solution text: 'sol <k>' then one 'use <u> <v>' line per chosen link."""
    pairs = sorted(instance.link(i).pair() for i in sol.link_ids)
    lines = [f"sol {len(pairs)}"]
    lines += [f"use {u} {v}" for u, v in pairs]
    return "\n".join(lines) + "\n"


def parse_solution(instance: Instance, text: str) -> Solution:
    """Parse 'sol' text back into link ids of ``instance`` (matched by pair)."""
    by_pair: dict[tuple[int, int], int] = {}
    for lk in instance.links:
        by_pair.setdefault(lk.pair(), lk.id)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("sol"):
        raise InstanceError("expected 'sol <k>' header")
    ids: set[int] = set()
    for idx, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != 3 or parts[0] != "use":
            raise InstanceError(f"line {idx}: expected 'use <u> <v>'")
        u, v = int(parts[1]), int(parts[2])
        key = (u, v) if u <= v else (v, u)
        if key not in by_pair:
            raise InstanceError(f"line {idx}: link ({u},{v}) not in instance")
        ids.add(by_pair[key])
    return Solution(frozenset(ids))
