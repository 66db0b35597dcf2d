"""Command line interface.

Exit codes: 0 ok, 1 infeasible or invalid input, 2 property violation
detected (fuzz and verify).
"""

from __future__ import annotations

import argparse
import json
import sys

from .contraction import ContractionState
from .harness import SHAPES, FuzzConfig, GenParams, bench, fuzz, generate
from .instance import (
    InfeasibleInstanceError,
    InstanceError,
    parse,
    parse_solution,
    serialize,
    serialize_solution,
    is_feasible,
)
from .matching import leaf_cover_graph, min_weight_edge_cover
from .solver import (
    OracleBudgetError,
    cover,
    enumerate_shadow_minimal_optima,
    exact_opt,
)
from .instance import shadow_complete
from .structure import TreeIndex, find_stems, golden_tickets, semi_closed_subtree


def _load(path: str):
    try:
        with open(path) as f:
            return parse(f.read())
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        raise SystemExit(1)
    except InstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(1)


def cmd_solve(args) -> int:
    inst = _load(args.file)
    try:
        sol, trace = cover(inst, mode=args.mode)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(serialize_solution(inst, sol))
    if args.trace:
        with open(args.trace, "w") as f:
            json.dump(trace.to_json_dict(inst), f, indent=2)
            f.write("\n")
    return 0


def cmd_exact(args) -> int:
    inst = _load(args.file)
    work = shadow_complete(inst) if args.all_optima else inst
    try:
        res = exact_opt(work, max_links=args.max_links, max_expansions=args.budget)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 1
    except OracleBudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 1
    print(f"opt {res.value}")
    sys.stdout.write(serialize_solution(work, res.solution))
    if args.all_optima:
        sols, truncated = enumerate_shadow_minimal_optima(work, limit=args.limit, opt=res.value)
        print(f"shadow-minimal-optima {len(sols)}{' (truncated)' if truncated else ''}")
        for s in sols:
            sys.stdout.write(serialize_solution(work, s))
    return 0


def cmd_verify(args) -> int:
    inst = _load(args.file)
    try:
        with open(args.solution) as f:
            sol = parse_solution(inst, f.read())
    except (OSError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    ok, witness = is_feasible(inst, sol)
    if not ok:
        open_edges = [v for v in range(inst.n) if v != inst.tree.root and v not in witness]
        print(f"violation: solution leaves {len(open_edges)} tree edges uncovered: {open_edges}")
        return 2
    print(f"ok: {sol.size} links cover all {inst.n - 1} tree edges")
    if args.trace:
        try:
            with open(args.trace) as f:
                tdata = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: bad trace: {exc}", file=sys.stderr)
            return 1
        issues = _audit_trace_dict(tdata)
        if issues:
            print("trace violations:")
            for v in issues:
                print(f"  {v}")
            return 2
        print("trace ledger clean")
    return 0


def _audit_trace_dict(tdata: dict) -> list[str]:
    issues = []
    for i, s in enumerate(tdata.get("steps", [])):
        spent = s.get("spent3", 0)
        income = s.get("income3", 0) + s.get("injected3", 0)
        if spent + s.get("banked3", 0) > income:
            issues.append(f"step {i}: overdraft")
        if s.get("classification") == "extra-credit" and s.get("banked3") != 3:
            issues.append(f"step {i}: extra-credit step must bank one unit")
    return issues


def cmd_analyze(args) -> int:
    inst = _load(args.file)
    st = ContractionState(inst)
    idx = TreeIndex(st)
    stems = find_stems(st, idx)
    gtm = golden_tickets(st, stems, idx)
    graph = leaf_cover_graph(st, gtm, idx)
    try:
        covres = min_weight_edge_cover(graph)
        cover_info = {
            "total3": covres.total3,
            "matched": [[u, v] for (u, v, _e) in covres.matched],
            "unmatched": list(covres.unmatched),
        }
    except Exception as exc:
        cover_info = {"error": str(exc)}
    sct = semi_closed_subtree(st, set())
    out = {
        "n": inst.n,
        "m": inst.m,
        "leaves": sorted(idx.leaves),
        "stems": [{"stem": r.stem, "twin": list(inst.link(r.twin).pair())} for r in stems],
        "golden_tickets": {
            str(list(inst.link(lid).pair())): v for lid, v in sorted(gtm.gt.items()) if v > 0
        },
        "witnesses": [
            {"root": w[0], "pattern": w[1], "links": [list(inst.link(l).pair()) for l in w[2]]}
            for w in gtm.witnesses
        ],
        "leaf_cover": cover_info,
        "minimally_leaf_closed_root": sct.root,
    }
    json.dump(out, sys.stdout, indent=2)
    print()
    return 0


def cmd_fuzz(args) -> int:
    config = FuzzConfig(
        count=args.count,
        seed=args.seed,
        min_n=args.min_n,
        max_n=args.max_n,
        max_m_factor=args.max_m_factor,
        oracle_max_links=args.oracle_budget,
        out_dir=args.out,
        deep_checks_every=args.deep_every,
    )
    report = fuzz(config)
    if args.out:
        from .report import write_fuzz_outputs

        paths = write_fuzz_outputs(report, args.out)
        for p in paths:
            print(f"wrote {p}")
    print(
        f"instances {len(report.records)} oracle-solved {report.oracle_solved} "
        f"max-ratio {report.max_ratio:.4f} violations {report.violation_count}"
    )
    return 2 if report.violation_count else 0


def cmd_bench(args) -> int:
    sizes = []
    for part in args.sizes.split(","):
        n_s, m_s = part.split(":")
        sizes.append((int(n_s), int(m_s)))
    rows = bench(sizes, seed=args.seed, shape=args.shape)
    from .report import bench_csv, write_bench_plot

    sys.stdout.write(bench_csv(rows))
    if args.plot:
        write_bench_plot(rows, args.plot)
        print(f"wrote {args.plot}", file=sys.stderr)
    return 0


def cmd_gen(args) -> int:
    inst = generate(
        GenParams(n=args.n, m=args.m, shape=args.shape, leaf_links_only=args.leaf_only, seed=args.seed)
    )
    sys.stdout.write(serialize(inst))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tap", description="tree augmentation solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run the primal-dual cover")
    p.add_argument("file")
    p.add_argument("--mode", choices=("accumulate", "listing"), default="accumulate")
    p.add_argument("--trace", metavar="OUT.json")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("exact", help="exact optimum by branch and bound")
    p.add_argument("file")
    p.add_argument("--all-optima", action="store_true")
    p.add_argument("--limit", type=int, default=200)
    p.add_argument("--max-links", type=int, default=24)
    p.add_argument("--budget", type=int, default=500_000)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("verify", help="check a solution file against an instance")
    p.add_argument("file")
    p.add_argument("--solution", required=True)
    p.add_argument("--trace")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="stems, certified credits, cover graph as JSON")
    p.add_argument("file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fuzz", help="randomized property campaign")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--min-n", type=int, default=4)
    p.add_argument("--max-n", type=int, default=24)
    p.add_argument("--max-m-factor", type=int, default=4)
    p.add_argument("--oracle-budget", type=int, default=24, help="max candidate links for the oracle")
    p.add_argument("--deep-every", type=int, default=1)
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("bench", help="phase timings as CSV")
    p.add_argument("--sizes", default="100:400,1000:4000", help="comma list of n:m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shape", choices=SHAPES, default="uniform")
    p.add_argument("--plot", metavar="OUT.png")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="emit a generated instance")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--shape", choices=SHAPES, default="uniform")
    p.add_argument("--leaf-only", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
