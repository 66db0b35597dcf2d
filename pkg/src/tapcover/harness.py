"""Instance generators, fuzz campaigns, and benchmark timing.

Generation is deterministic per seed (``random.Random``, the stdlib
Mersenne Twister, so campaigns replicate across platforms).  Fuzzing runs
the solver pipeline against the oracle and the module properties; each
violation is persisted as a re-runnable instance file and greedily
minimized by link and leaf deletion while the violation survives.
"""

from __future__ import annotations

import heapq
import math
import os
import random
import time
from dataclasses import dataclass, field

from .contraction import ContractionState
from .instance import (
    Instance,
    InfeasibleInstanceError,
    build_instance,
    is_feasible,
    serialize,
    shadow_complete,
)
from .matching import leaf_cover_graph, min_weight_edge_cover
from .solver import (
    OracleBudgetError,
    audit_ledger,
    baseline_two_approx,
    cover,
    exact_opt,
    shadow_minimalize,
    solution_internal_degrees,
)
from .structure import TreeIndex, find_stems, golden_tickets, minimally_leaf_closed, up_link

SHAPES = ("uniform", "caterpillar", "balanced", "gadget-chain")


class GenerationError(RuntimeError):
    """Parameters admit no feasible instance (for example too sparse)."""


@dataclass(frozen=True)
class GenParams:
    n: int
    m: int
    shape: str = "uniform"
    leaf_links_only: bool = False
    seed: int = 0


def _prufer_tree(rng: random.Random, n: int) -> list[tuple[int, int]]:
    """Uniform random labeled tree via sequence decoding, rooted at 0."""
    if n == 2:
        return [(0, 1)]
    seq = [rng.randrange(n) for _ in range(n - 2)]
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    undirected: list[tuple[int, int]] = []
    leafset = sorted(i for i in range(n) if degree[i] == 1)
    heap = list(leafset)
    heapq.heapify(heap)
    for x in seq:
        leaf = heapq.heappop(heap)
        undirected.append((leaf, x))
        degree[x] -= 1
        if degree[x] == 1:
            heapq.heappush(heap, x)
    u = heapq.heappop(heap)
    v = heapq.heappop(heap)
    undirected.append((u, v))
    # orient away from the root
    adj: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in undirected:
        adj[a].append(b)
        adj[b].append(a)
    edges = []
    seen = {0}
    stack = [0]
    while stack:
        p = stack.pop()
        for c in adj[p]:
            if c not in seen:
                seen.add(c)
                edges.append((p, c))
                stack.append(c)
    return edges


def _caterpillar_tree(rng: random.Random, n: int) -> list[tuple[int, int]]:
    spine = max(1, n // 2)
    edges = [(i - 1, i) for i in range(1, spine)]
    for i in range(spine, n):
        edges.append((rng.randrange(spine), i))
    return edges


def _balanced_tree(n: int) -> list[tuple[int, int]]:
    return [((i - 1) // 2, i) for i in range(1, n)]


def _gadget_chain_tree(n: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Chain of certified three-leaf gadgets hanging off a spine.

    Each gadget is a root v with original leaves a, b (linked) and a closed
    leaf c; the v-to-grandparent link covers both the gadget's anchor edge
    and the spine edge above it, so the base link set is already feasible.
    """
    edges: list[tuple[int, int]] = []
    base_links: list[tuple[int, int]] = []
    prev = 0
    node = 1
    while node + 5 <= n:
        s, v, a, b, c = node, node + 1, node + 2, node + 3, node + 4
        edges += [(prev, s), (s, v), (v, a), (v, b), (v, c)]
        base_links += [(a, b), (c, v), (v, prev)]
        prev = s
        node += 5
    while node < n:
        edges.append((0, node))
        base_links.append((node, 0))
        node += 1
    return edges, base_links


def _subtree_members(tree, x: int) -> set[int]:
    out = set()
    stack = [x]
    while stack:
        q = stack.pop()
        out.add(q)
        stack.extend(tree.children[q])
    return out


def generate(params: GenParams) -> Instance:
    """Deterministic feasible instance for the given parameters."""
    if params.n < 2:
        raise GenerationError("need at least two nodes")
    if params.shape not in SHAPES:
        raise GenerationError(f"unknown shape {params.shape!r}")
    rng = random.Random(params.seed)
    base_links: list[tuple[int, int]] = []
    if params.shape == "uniform":
        edges = _prufer_tree(rng, params.n)
    elif params.shape == "caterpillar":
        edges = _caterpillar_tree(rng, params.n)
    elif params.shape == "balanced":
        edges = _balanced_tree(params.n)
    else:
        edges, base_links = _gadget_chain_tree(params.n)

    probe = build_instance(edges, 0, [])
    tree = probe.tree
    pool = tree.leaves() if params.leaf_links_only else list(range(params.n))
    if len(pool) < 2:
        raise GenerationError("no viable link endpoints")

    links = list(base_links)
    guard = 40 * params.m + 400
    while len(links) < params.m and guard > 0:
        guard -= 1
        u, v = rng.choice(pool), rng.choice(pool)
        if u != v:
            links.append((u, v))

    # make it feasible: cover open edges deepest-first with a crossing link
    for _ in range(params.n + 2):
        inst = build_instance(edges, 0, links)
        ok, witness = is_feasible(inst, set(range(inst.m)))
        if ok:
            return inst
        open_children = sorted(
            (x for x in range(1, params.n) if x not in witness),
            key=lambda x: -tree.depth[x],
        )
        progressed = False
        for x in open_children:
            members = _subtree_members(tree, x)
            inside = [q for q in pool if q in members]
            outside = [q for q in pool if q not in members]
            if not inside or not outside:
                continue
            links.append((rng.choice(inside), rng.choice(outside)))
            progressed = True
        if not progressed:
            raise GenerationError("parameters too sparse for a feasible instance")
    raise GenerationError("could not reach feasibility")


@dataclass
class FuzzRecord:
    index: int
    seed: int
    n: int
    m: int
    shape: str
    opt: int | None
    cover_size: int
    baseline_size: int
    ratio: float | None
    ledger_ok: bool
    violations: tuple[str, ...]
    counterexample: str | None = None


@dataclass
class FuzzConfig:
    count: int = 100
    seed: int = 0
    min_n: int = 4
    max_n: int = 24
    max_m_factor: int = 4
    shapes: tuple[str, ...] = SHAPES
    leaf_only_every: int = 5  # every k-th instance restricts links to leaves
    oracle_max_links: int = 24
    oracle_expansions: int = 300_000
    deep_checks_every: int = 1  # cover-claim / lower-bound checks cadence
    out_dir: str | None = None


@dataclass
class FuzzReport:
    config: dict
    records: list[FuzzRecord] = field(default_factory=list)
    max_ratio: float = 0.0
    violation_count: int = 0
    oracle_solved: int = 0

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "aggregates": {
                "instances": len(self.records),
                "oracle_solved": self.oracle_solved,
                "max_ratio": self.max_ratio,
                "violation_count": self.violation_count,
            },
            "records": [
                {
                    "index": r.index,
                    "seed": r.seed,
                    "n": r.n,
                    "m": r.m,
                    "shape": r.shape,
                    "opt": r.opt,
                    "cover": r.cover_size,
                    "baseline": r.baseline_size,
                    "ratio": r.ratio,
                    "ledger_ok": r.ledger_ok,
                    "violations": list(r.violations),
                    "counterexample": r.counterexample,
                }
                for r in self.records
            ],
        }


def check_instance(
    inst: Instance,
    oracle_max_links: int = 24,
    oracle_expansions: int = 300_000,
    deep: bool = True,
) -> tuple[list[str], dict]:
    """Run the property battery; returns (violation names, measurements)."""
    violations: list[str] = []
    meas: dict = {}
    try:
        sol, trace = cover(inst)
    except InfeasibleInstanceError:
        raise
    except Exception as exc:  # crash is itself a reportable violation
        return [f"cover-crash:{type(exc).__name__}"], meas
    ok, _ = is_feasible(inst, sol)
    if not ok:
        violations.append("cover-infeasible")
    meas["cover"] = sol.size
    for before, after in trace.stem_weight_checks:
        if after > before:
            violations.append("stem-weight-increase")
            break
    for f in trace.falsifications:
        violations.append(f"trace:{f['kind']}")

    if deep:
        st = ContractionState(inst)
        idx = TreeIndex(st)
        v = minimally_leaf_closed(st, idx)
        leaves_in = [x for x in idx.leaves if idx.in_subtree(v, x)]
        try:
            ups = {up_link(st, leaf, idx) for leaf in leaves_in}
            covered: set[int] = set()
            for lid in ups:
                path = st.current_path(lid)
                depth = inst.tree.depth
                for a, b in zip(path, path[1:]):
                    covered.add(a if depth[a] > depth[b] else b)
            for x in idx.order:
                if x != v and idx.in_subtree(v, x) and x not in covered:
                    violations.append("cover-claim")
                    break
        except Exception:
            violations.append("cover-claim-error")

    base = baseline_two_approx(inst)
    ok, _ = is_feasible(inst, base)
    if not ok:
        violations.append("baseline-infeasible")
    meas["baseline"] = base.size

    opt = None
    try:
        opt = exact_opt(inst, max_links=oracle_max_links, max_expansions=oracle_expansions).value
    except OracleBudgetError:
        pass
    meas["opt"] = opt
    if opt is not None:
        if sol.size > math.ceil(4 * opt / 3):
            violations.append("ratio")
        if base.size > 2 * opt:
            violations.append("baseline-ratio")
        led = audit_ledger(trace, opt=opt)
        if led.violations:
            violations.append("ledger")
        meas["ledger_ok"] = not led.violations
        if deep:
            comp = shadow_complete(inst)
            res = exact_opt(comp, max_links=oracle_max_links, max_expansions=oracle_expansions)
            if res.value != opt:
                violations.append("shadow-invariance")
            fmin = shadow_minimalize(comp, res.solution)
            leaves = set(comp.tree.leaves())
            pairs = singles = 0
            for lid in fmin.link_ids:
                lk = comp.link(lid)
                lu, lv = lk.u in leaves, lk.v in leaves
                if lu and lv:
                    pairs += 1
                elif lu or lv:
                    singles += 1
            degs = solution_internal_degrees(comp, fmin)
            if 4 * pairs + 3 * singles + sum(degs.values()) > 4 * opt:
                violations.append("lower-bound-claim")
            if trace.first_cover_weight3 is not None:
                w3 = trace.first_cover_weight3
                u = trace.first_cover_unmatched
                if 3 * w3 + 9 * u > 12 * opt:
                    violations.append("lower-bound-lemma")
    else:
        meas["ledger_ok"] = True
    return violations, meas


def _delete_link(inst: Instance, lid: int) -> Instance:
    links = [lk for lk in inst.links if lk.id != lid]
    edges = [(inst.tree.parent[v], v) for v in range(inst.n) if v != inst.tree.root]
    return build_instance(edges, inst.tree.root, [(lk.u, lk.v) for lk in links])


def _delete_leaf(inst: Instance, leaf: int) -> Instance | None:
    tree = inst.tree
    if not tree.is_leaf(leaf) or inst.n <= 2:
        return None
    remap = {}
    nxt = 0
    for v in range(inst.n):
        if v != leaf:
            remap[v] = nxt
            nxt += 1
    edges = [
        (remap[tree.parent[v]], remap[v])
        for v in range(inst.n)
        if v != tree.root and v != leaf
    ]
    links = [
        (remap[lk.u], remap[lk.v])
        for lk in inst.links
        if lk.u != leaf and lk.v != leaf
    ]
    return build_instance(edges, remap[tree.root], links)


def minimize_counterexample(inst: Instance, predicate) -> Instance:
    """Greedy deletion of links then leaves while the predicate holds."""
    current = inst
    changed = True
    while changed:
        changed = False
        for lid in sorted((lk.id for lk in current.links), reverse=True):
            trial = _delete_link(current, lid)
            try:
                if predicate(trial):
                    current = trial
                    changed = True
                    break
            except Exception:
                continue
        if changed:
            continue
        for leaf in sorted(current.tree.leaves(), reverse=True):
            trial = _delete_leaf(current, leaf)
            if trial is None:
                continue
            try:
                if predicate(trial):
                    current = trial
                    changed = True
                    break
            except Exception:
                continue
    return current


def fuzz(config: FuzzConfig) -> FuzzReport:
    """Run a campaign; identical config and seed give identical reports."""
    report = FuzzReport(config=vars(config).copy())
    report.config["shapes"] = list(config.shapes)
    master = random.Random(config.seed)
    for i in range(config.count):
        seed_i = master.randrange(1 << 30)
        rng = random.Random(seed_i)
        n = rng.randint(config.min_n, config.max_n)
        m = rng.randint(n, config.max_m_factor * n)
        shape = config.shapes[i % len(config.shapes)]
        leaf_only = config.leaf_only_every > 0 and i % config.leaf_only_every == 0
        params = GenParams(n=n, m=m, shape=shape, leaf_links_only=leaf_only, seed=seed_i)
        try:
            inst = generate(params)
        except GenerationError:
            continue
        deep = config.deep_checks_every > 0 and i % config.deep_checks_every == 0
        violations, meas = check_instance(
            inst,
            oracle_max_links=config.oracle_max_links,
            oracle_expansions=config.oracle_expansions,
            deep=deep,
        )
        opt = meas.get("opt")
        ratio = meas["cover"] / opt if opt else None
        cex_path = None
        if violations:
            report.violation_count += 1
            first = violations[0]

            def still_violates(trial: Instance, name=first) -> bool:
                try:
                    ok, _ = is_feasible(trial, set(range(trial.m)))
                    if not ok:
                        return False
                    got, _m = check_instance(
                        trial,
                        oracle_max_links=config.oracle_max_links,
                        oracle_expansions=config.oracle_expansions,
                        deep=True,
                    )
                    return name in got
                except Exception:
                    return False

            small = minimize_counterexample(inst, still_violates)
            if config.out_dir:
                os.makedirs(config.out_dir, exist_ok=True)
                cex_path = f"{config.out_dir}/cex_{i:05d}_{first.replace(':', '_')}.tap"
                with open(cex_path, "w") as f:
                    f.write(f"# violation: {first}\n# seed: {seed_i}\n")
                    f.write(serialize(small))
        if opt:
            report.oracle_solved += 1
            report.max_ratio = max(report.max_ratio, meas["cover"] / opt)
        report.records.append(
            FuzzRecord(
                index=i,
                seed=seed_i,
                n=inst.n,
                m=inst.m,
                shape=shape,
                opt=opt,
                cover_size=meas.get("cover", -1),
                baseline_size=meas.get("baseline", -1),
                ratio=ratio,
                ledger_ok=meas.get("ledger_ok", True),
                violations=tuple(violations),
                counterexample=cex_path,
            )
        )
    return report


def bench(sizes: list[tuple[int, int]], seed: int = 0, shape: str = "uniform") -> list[dict]:
    """Wall time per phase; returns rows with n, m, phase, millis."""
    rows: list[dict] = []
    for n, m in sizes:
        inst = generate(GenParams(n=n, m=m, shape=shape, seed=seed))
        st = ContractionState(inst)
        t0 = time.perf_counter()
        idx = TreeIndex(st)
        stems = find_stems(st, idx)
        gtm = golden_tickets(st, stems, idx)
        t1 = time.perf_counter()
        graph = leaf_cover_graph(st, gtm, idx)
        min_weight_edge_cover(graph)
        t2 = time.perf_counter()
        cover(inst)
        t3 = time.perf_counter()
        rows.append({"n": n, "m": inst.m, "phase": "ticket-detection", "millis": 1000 * (t1 - t0)})
        rows.append({"n": n, "m": inst.m, "phase": "edge-cover", "millis": 1000 * (t2 - t1)})
        rows.append({"n": n, "m": inst.m, "phase": "cover-loop", "millis": 1000 * (t3 - t2)})
    return rows
