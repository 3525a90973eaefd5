"""Report rendering: aligned text tables, CSV, and matplotlib figures."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Mapping

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import EvalReport, RobustnessPoint


def render_text_table(report: EvalReport) -> str:
    head = [
        ("cases", str(report.n_cases)),
        ("validity %", f"{report.validity_pct:.2f}"),
        ("mean sparsity", f"{report.mean_sparsity:.3f}"),
        ("mean proximity", f"{report.mean_proximity:.4f}"),
        ("mean runtime (us)", f"{report.mean_runtime_us:.1f}"),
    ]
    if report.robustness_pct is not None:
        head.append(("robustness %", f"{report.robustness_pct:.2f}"))
    width = max(len(k) for k, _ in head)
    lines = [f"{k.ljust(width)}  {v}" for k, v in head]
    lines.append("")
    cols = ("idx", "valid", "sparsity", "proximity", "runtime_us", "changed")
    rows = [
        (
            str(r.index),
            "yes" if r.valid else "no",
            str(r.sparsity),
            "-" if r.proximity is None else f"{r.proximity:.4f}",
            str(r.runtime_us),
            ",".join(r.changed_features) or "-",
        )
        for r in report.per_case
    ]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)]
    lines.append("  ".join(c.ljust(w) for c, w in zip(cols, widths)))
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def write_per_case_csv(report: EvalReport, path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "valid", "sparsity", "proximity", "runtime_us", "changed", "error"]
        )
        for r in report.per_case:
            writer.writerow(
                [
                    r.index,
                    int(r.valid),
                    r.sparsity,
                    "" if r.proximity is None else r.proximity,
                    r.runtime_us,
                    "|".join(r.changed_features),
                    r.error or "",
                ]
            )


def write_summary_figure(report: EvalReport, path: Path) -> None:
    fig, axes = plt.subplots(1, 3, figsize=(9, 3))
    valid = [r for r in report.per_case if r.valid]
    axes[0].bar(["valid", "invalid"], [len(valid), report.n_cases - len(valid)],
                color=["tab:green", "tab:red"])
    axes[0].set_title(f"validity {report.validity_pct:.1f}%")
    if valid:
        axes[1].hist([r.sparsity for r in valid], bins="auto", color="tab:blue")
        axes[2].hist([r.proximity for r in valid], bins="auto", color="tab:orange")
    axes[1].set_title("sparsity (valid cases)")
    axes[2].set_title("proximity (valid cases)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report_files(
    report: EvalReport, outdir: Path, basename: str = "report"
) -> list[Path]:
    """JSON + aligned text table + per-case CSV + summary figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = outdir / f"{basename}.json"
    json_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    written.append(json_path)
    txt_path = outdir / f"{basename}.txt"
    txt_path.write_text(render_text_table(report))
    written.append(txt_path)
    csv_path = outdir / f"{basename}_per_case.csv"
    write_per_case_csv(report, csv_path)
    written.append(csv_path)
    fig_path = outdir / f"{basename}.png"
    write_summary_figure(report, fig_path)
    written.append(fig_path)
    return written


def write_robustness_files(
    sweep: Mapping[float, RobustnessPoint], outdir: Path, basename: str = "robustness"
) -> list[Path]:
    """CSV of the step-size sweep plus the trade-off figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    d_eps = sorted(sweep)
    written = []
    csv_path = outdir / f"{basename}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["d_eps", "robustness_pct", "mean_proximity", "n_valid"])
        for d in d_eps:
            p = sweep[d]
            writer.writerow([d, p.robustness_pct, p.mean_proximity, p.n_valid])
    written.append(csv_path)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3))
    ax1.plot(d_eps, [sweep[d].robustness_pct for d in d_eps], "o-", color="tab:green")
    ax1.set_xlabel("step size")
    ax1.set_ylabel("robustness %")
    ax1.set_ylim(0, 105)
    ax2.plot(d_eps, [sweep[d].mean_proximity for d in d_eps], "o-", color="tab:orange")
    ax2.set_xlabel("step size")
    ax2.set_ylabel("mean proximity")
    fig.tight_layout()
    fig_path = outdir / f"{basename}.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    written.append(fig_path)
    return written


def render_sweep_table(sweep: Mapping[float, RobustnessPoint]) -> str:
    lines = ["d_eps     robustness%   mean_proximity   n_valid"]
    for d in sorted(sweep):
        p = sweep[d]
        lines.append(
            f"{d:<9.4g} {p.robustness_pct:<13.2f} {p.mean_proximity:<16.4f} {p.n_valid}"
        )
    return "\n".join(lines) + "\n"
