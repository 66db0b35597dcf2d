"""Evolving tree under link contractions.

Contracting a set of links collapses the union of their tree paths
(overlapping paths merge, matching the 2-edge-connected closure) into the
shallowest node of each merged component.  Surviving links are
re-endpointed onto representatives; self-loops are dropped.  The state is
single-owner mutable; copy() produces an independent scratch state.
"""

from __future__ import annotations

from .instance import Instance, InstanceError, Solution


class ContractionState:
    """Union-find over base nodes plus the current tree view and link table."""

    def __init__(self, base: Instance):
        n = base.n
        self.base = base
        self.uf = list(range(n))
        self.live = [True] * n
        self.compound = [False] * n
        self.cur_parent = list(base.tree.parent)
        self.cur_children: list[set[int]] = [set(c) for c in base.tree.children]
        # current links: id -> (u_rep, v_rep); adjacency: rep -> link-id set
        self.cur_links: dict[int, tuple[int, int]] = {}
        self.adj: list[set[int]] = [set() for _ in range(n)]
        for lk in base.links:
            self.cur_links[lk.id] = (lk.u, lk.v)
            self.adj[lk.u].add(lk.id)
            self.adj[lk.v].add(lk.id)
        self.num_live = n
        self.root = base.tree.root
        self.contracted_history: set[int] = set()

    def copy(self) -> "ContractionState":
        st = ContractionState.__new__(ContractionState)
        st.base = self.base
        st.uf = list(self.uf)
        st.live = list(self.live)
        st.compound = list(self.compound)
        st.cur_parent = list(self.cur_parent)
        st.cur_children = [set(c) for c in self.cur_children]
        st.cur_links = dict(self.cur_links)
        st.adj = [set(a) for a in self.adj]
        st.num_live = self.num_live
        st.root = self.root
        st.contracted_history = set(self.contracted_history)
        return st

    def find(self, v: int) -> int:
        uf = self.uf
        r = v
        while uf[r] != r:
            r = uf[r]
        while uf[v] != r:
            uf[v], v = r, uf[v]
        return r

    def current_path(self, link_id: int) -> list[int]:
        """Path between a link's current endpoints in the current tree."""
        if link_id not in self.cur_links:
            raise InstanceError(f"link {link_id} is not in the current view")
        u, v = self.cur_links[link_id]
        depth = self.base.tree.depth
        up, vp = [u], [v]
        while u != v:
            # base depth ordering is preserved by contraction (each rep is
            # the shallowest member of its component)
            if depth[u] >= depth[v]:
                u = self.cur_parent[u]
                up.append(u)
            else:
                v = self.cur_parent[v]
                vp.append(v)
        up.pop()
        return up + vp[::-1]

    def current_lca(self, u: int, v: int) -> int:
        depth = self.base.tree.depth
        while u != v:
            if depth[u] >= depth[v]:
                u = self.cur_parent[u]
            else:
                v = self.cur_parent[v]
        return u

    def contract_links(self, link_ids) -> list[int]:
        """Contract the given current links; returns new compound rep ids."""
        ids = sorted(set(link_ids))
        groups: list[set[int]] = []
        for lid in ids:
            path = set(self.current_path(lid))
            merged = [g for g in groups if g & path]
            for g in merged:
                groups.remove(g)
                path |= g
            groups.append(path)
        depth = self.base.tree.depth
        new_reps: list[int] = []
        for grp in groups:
            top = min(grp, key=lambda q: (depth[q], q))
            members = grp - {top}
            # re-route children and parents
            child_union: set[int] = set(self.cur_children[top])
            for q in members:
                child_union |= self.cur_children[q]
                self.live[q] = False
                self.uf[q] = top
                self.num_live -= 1
            child_union -= grp
            self.cur_children[top] = child_union
            for c in child_union:
                self.cur_parent[c] = top
            for q in members:
                self.cur_children[q] = set()
            # re-endpoint links incident to the merged component
            touched: set[int] = set(self.adj[top])
            for q in members:
                touched |= self.adj[q]
                self.adj[q] = set()
            new_adj_top: set[int] = set()
            for lid in touched:
                if lid not in self.cur_links:
                    continue
                u, v = self.cur_links[lid]
                nu = top if u in grp else u
                nv = top if v in grp else v
                if nu == nv:
                    del self.cur_links[lid]
                else:
                    self.cur_links[lid] = (nu, nv)
                    new_adj_top.add(lid)
            self.adj[top] = new_adj_top
            self.compound[top] = True
            new_reps.append(top)
        self.contracted_history.update(ids)
        return new_reps

    def current_leaves(self) -> set[int]:
        """Leaves of the current tree (root excluded when more than one node)."""
        if self.num_live <= 1:
            return set()
        return {
            v
            for v in range(self.base.n)
            if self.live[v] and not self.cur_children[v] and v != self.find(self.root)
        }

    def live_nodes(self) -> list[int]:
        return [v for v in range(self.base.n) if self.live[v]]

    def current_root(self) -> int:
        return self.find(self.root)

    def links_at(self, rep: int) -> set[int]:
        return self.adj[rep]

    def lift_solution(self, chosen) -> Solution:
        """Map chosen current links back to base-instance link ids.

        Ids are stable across contraction (only endpoints move), so lifting
        validates and passes them through.  A link that was swallowed into a
        self-loop without ever being part of a contraction call cannot be a
        choice and is rejected.
        """
        ids = set(chosen)
        for lid in ids:
            if not (0 <= lid < self.base.m):
                raise InstanceError(f"unknown link id {lid}")
            if lid in self.cur_links or lid in self.contracted_history:
                continue
            raise InstanceError(f"link {lid} was contracted away and is not liftable")
        return Solution(frozenset(ids))


def contract_links(state: ContractionState, link_ids) -> list[int]:
    return state.contract_links(link_ids)


def current_leaves(state: ContractionState) -> set[int]:
    return state.current_leaves()


def lift_solution(state: ContractionState, chosen) -> Solution:
    return state.lift_solution(chosen)
