"""Report rendering: delimited outputs plus matplotlib figures on disk."""

from __future__ import annotations

import csv
import io
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import FuzzReport  # noqa: E402

FUZZ_CSV_FIELDS = [
    "index",
    "seed",
    "n",
    "m",
    "shape",
    "opt",
    "cover",
    "baseline",
    "ratio",
    "ledger_ok",
    "violations",
]


def fuzz_report_csv(report: FuzzReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FUZZ_CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in report.records:
        w.writerow(
            {
                "index": r.index,
                "seed": r.seed,
                "n": r.n,
                "m": r.m,
                "shape": r.shape,
                "opt": "" if r.opt is None else r.opt,
                "cover": r.cover_size,
                "baseline": r.baseline_size,
                "ratio": "" if r.ratio is None else f"{r.ratio:.6f}",
                "ledger_ok": int(r.ledger_ok),
                "violations": ";".join(r.violations),
            }
        )
    return buf.getvalue()


def write_fuzz_outputs(report: FuzzReport, out_dir: str) -> list[str]:
    """Write report.json, report.csv, and the two figures; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    jpath = os.path.join(out_dir, "report.json")
    with open(jpath, "w") as f:
        json.dump(report.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    paths.append(jpath)
    cpath = os.path.join(out_dir, "report.csv")
    with open(cpath, "w") as f:
        f.write(fuzz_report_csv(report))
    paths.append(cpath)

    ratios = [r.ratio for r in report.records if r.ratio is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    if ratios:
        ax.hist(ratios, bins=24, color="#3b6ea5", edgecolor="white")
    ax.axvline(4 / 3, color="#b5432a", linestyle="--", label="4/3")
    ax.set_xlabel("cover size / optimum")
    ax.set_ylabel("instances")
    ax.legend(loc="upper right")
    fig.tight_layout()
    hpath = os.path.join(out_dir, "ratio_hist.png")
    fig.savefig(hpath, dpi=120)
    plt.close(fig)
    paths.append(hpath)

    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r.n for r in report.records if r.ratio is not None]
    if xs:
        ax.scatter(xs, ratios, s=14, alpha=0.6, color="#3b6ea5")
    ax.axhline(4 / 3, color="#b5432a", linestyle="--")
    ax.set_xlabel("nodes")
    ax.set_ylabel("ratio")
    fig.tight_layout()
    spath = os.path.join(out_dir, "ratio_by_size.png")
    fig.savefig(spath, dpi=120)
    plt.close(fig)
    paths.append(spath)
    return paths


def bench_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["n", "m", "phase", "millis"], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({**row, "millis": f"{row['millis']:.3f}"})
    return buf.getvalue()


def write_bench_plot(rows: list[dict], path: str) -> str:
    phases = sorted({r["phase"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for phase in phases:
        pts = sorted((r["n"], r["millis"]) for r in rows if r["phase"] == phase)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=phase)
    ax.set_xlabel("nodes")
    ax.set_ylabel("milliseconds")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
