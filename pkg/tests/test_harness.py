from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from tapcover import is_feasible, link_path, serialize
from tapcover.harness import (
    FuzzConfig,
    GenParams,
    GenerationError,
    bench,
    check_instance,
    fuzz,
    generate,
    minimize_counterexample,
)
from tapcover.report import bench_csv, fuzz_report_csv, write_fuzz_outputs
from tapcover.solver import cover


class TestGenerate:
    def test_smallest(self):
        inst = generate(GenParams(n=2, m=1, seed=0))
        assert inst.n == 2
        ok, _ = is_feasible(inst, set(range(inst.m)))
        assert ok

    def test_deterministic(self):
        a = generate(GenParams(n=30, m=60, shape="uniform", seed=99))
        b = generate(GenParams(n=30, m=60, shape="uniform", seed=99))
        assert serialize(a) == serialize(b)
        c = generate(GenParams(n=30, m=60, shape="uniform", seed=100))
        assert serialize(a) != serialize(c)

    @pytest.mark.parametrize("shape", ["uniform", "caterpillar", "balanced", "gadget-chain"])
    def test_all_shapes_feasible(self, shape):
        for seed in range(5):
            inst = generate(GenParams(n=24, m=40, shape=shape, seed=seed))
            ok, _ = is_feasible(inst, set(range(inst.m)))
            assert ok

    def test_leaf_links_only(self):
        inst = generate(GenParams(n=20, m=30, leaf_links_only=True, seed=3))
        leaves = set(inst.tree.leaves())
        assert all(lk.u in leaves and lk.v in leaves for lk in inst.links)
        ok, _ = is_feasible(inst, set(range(inst.m)))
        assert ok

    def test_gadget_chain_has_extra_credit_steps(self):
        # three certified gadgets hang off the spine: each banks a unit
        inst = generate(GenParams(n=16, m=9, shape="gadget-chain", seed=0))
        _sol, trace = cover(inst)
        extra = [s for s in trace.steps if s.kind == "witness-B"]
        assert len(extra) == 3
        assert all(s.banked3 == 3 for s in extra)

    def test_unusable_params(self):
        with pytest.raises(GenerationError):
            generate(GenParams(n=1, m=0))
        with pytest.raises(GenerationError):
            generate(GenParams(n=2, m=1, leaf_links_only=True, seed=0))


class TestCheckInstance:
    def test_clean_on_demo(self, demo):
        violations, meas = check_instance(demo)
        assert violations == []
        assert meas["opt"] == 4

    def test_flags_injected_ticket_bug(self, demo, monkeypatch):
        # force certified credit 2 on every link: the weighting lies about
        # the lower bound and the lemma check must notice on some instance
        import tapcover.harness as hz
        from tapcover.structure import GoldenTicketMap

        def bogus(state, stems=None, idx=None):
            gtm = GoldenTicketMap()
            for lid in state.cur_links:
                gtm.gt[lid] = 2
            return gtm

        monkeypatch.setattr("tapcover.solver.golden_tickets", bogus)
        found = []
        for seed in range(12):
            inst = hz.generate(GenParams(n=10, m=14, seed=seed))
            violations, _ = hz.check_instance(inst)
            found.extend(violations)
        assert any(v in ("lower-bound-lemma", "ratio", "ledger") for v in found)


class TestMinimize:
    def test_shrinks_while_predicate_holds(self, demo):
        # predicate: some link path has at least four nodes
        def pred(inst):
            return any(len(link_path(inst, lk)) >= 4 for lk in inst.links)

        small = minimize_counterexample(demo, pred)
        assert pred(small)
        assert small.m <= demo.m and small.n <= demo.n
        # minimal under link/leaf deletion: one link, interior chain remains
        assert small.m == 1
        assert small.n <= 6
        for leaf in small.tree.leaves():
            assert any(leaf in (lk.u, lk.v) for lk in small.links)


class TestFuzz:
    def test_small_campaign_clean(self, tmp_path):
        config = FuzzConfig(count=25, seed=11, min_n=4, max_n=14, out_dir=str(tmp_path))
        report = fuzz(config)
        assert report.violation_count == 0
        assert report.oracle_solved > 10
        assert report.max_ratio <= 4 / 3 + 0.5

    def test_report_reproducible(self):
        config = FuzzConfig(count=12, seed=4, min_n=4, max_n=12)
        a = json.dumps(fuzz(config).to_json_dict(), sort_keys=True)
        b = json.dumps(fuzz(config).to_json_dict(), sort_keys=True)
        assert a == b

    def test_oracle_budget_zero_skips_ratio(self):
        config = FuzzConfig(count=8, seed=5, min_n=4, max_n=10, oracle_max_links=0)
        report = fuzz(config)
        assert report.oracle_solved == 0
        assert all(r.opt is None for r in report.records)
        assert report.violation_count == 0  # feasibility checks still ran


class TestBench:
    def test_rows_and_csv(self):
        rows = bench([(10, 20)], seed=1)
        assert [r["phase"] for r in rows] == ["ticket-detection", "edge-cover", "cover-loop"]
        text = bench_csv(rows)
        assert text.splitlines()[0] == "n,m,phase,millis"
        assert len(text.splitlines()) == 4


class TestReportFiles:
    def test_fuzz_outputs_written(self, tmp_path):
        report = fuzz(FuzzConfig(count=6, seed=2, min_n=4, max_n=10))
        paths = write_fuzz_outputs(report, str(tmp_path))
        names = {os.path.basename(p) for p in paths}
        assert names == {"report.json", "report.csv", "ratio_hist.png", "ratio_by_size.png"}
        for p in paths:
            assert os.path.getsize(p) > 0
        csv_text = fuzz_report_csv(report)
        assert csv_text.startswith("index,seed,n,m,shape,opt,cover,baseline,ratio")


def run_cli(*args, expect=0):
    proc = subprocess.run(
        [sys.executable, "-m", "tapcover.cli", *args],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == expect, (proc.returncode, proc.stdout, proc.stderr)
    return proc


class TestCli:
    def test_gen_solve_verify_roundtrip(self, tmp_path):
        p = run_cli("gen", "--n", "14", "--m", "20", "--seed", "8")
        inst_file = tmp_path / "i.tap"
        inst_file.write_text(p.stdout)
        trace_file = tmp_path / "t.json"
        p = run_cli("solve", str(inst_file), "--trace", str(trace_file))
        sol_file = tmp_path / "s.txt"
        sol_file.write_text(p.stdout)
        assert p.stdout.startswith("sol ")
        p = run_cli("verify", str(inst_file), "--solution", str(sol_file), "--trace", str(trace_file))
        assert "ok:" in p.stdout and "ledger clean" in p.stdout

    def test_verify_rejects_bad_solution(self, tmp_path):
        inst_file = tmp_path / "i.tap"
        inst_file.write_text(run_cli("gen", "--n", "10", "--m", "14", "--seed", "1").stdout)
        sol = tmp_path / "bad.txt"
        sol.write_text("sol 0\n")
        run_cli("verify", str(inst_file), "--solution", str(sol), expect=2)

    def test_exact_and_analyze(self, tmp_path):
        inst_file = tmp_path / "i.tap"
        inst_file.write_text(run_cli("gen", "--n", "10", "--m", "12", "--seed", "2").stdout)
        p = run_cli("exact", str(inst_file), "--all-optima")
        assert p.stdout.startswith("opt ")
        assert "shadow-minimal-optima" in p.stdout
        p = run_cli("analyze", str(inst_file))
        data = json.loads(p.stdout)
        assert {"stems", "golden_tickets", "witnesses", "leaf_cover"} <= set(data)

    def test_invalid_input_exit_code(self, tmp_path):
        bad = tmp_path / "bad.tap"
        bad.write_text("not a tap file\n")
        run_cli("solve", str(bad), expect=1)

    def test_infeasible_exit_code(self, tmp_path):
        f = tmp_path / "inf.tap"
        f.write_text("tap 1\nnodes 3 root 0\nedge 0 1\nedge 0 2\nlink 1 0\n")
        run_cli("solve", str(f), expect=1)
        run_cli("exact", str(f), expect=1)

    def test_fuzz_cli_and_outputs(self, tmp_path):
        out = tmp_path / "fz"
        p = run_cli(
            "fuzz", "--count", "8", "--seed", "3", "--min-n", "4", "--max-n", "10",
            "--out", str(out),
        )
        assert "violations 0" in p.stdout
        assert (out / "report.json").exists()
        assert (out / "ratio_hist.png").exists()

    def test_bench_cli(self, tmp_path):
        plot = tmp_path / "b.png"
        p = run_cli("bench", "--sizes", "12:24", "--plot", str(plot))
        assert p.stdout.splitlines()[0] == "n,m,phase,millis"
        assert plot.exists()
