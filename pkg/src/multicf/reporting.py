"""Delimited report files plus matplotlib figures rendered alongside them.

Every figure goes next to its TSV with the same stem; rendering uses the Agg
backend and strips volatile PNG metadata so reruns produce stable bytes.
"""
from __future__ import annotations

import math
from pathlib import Path

PNG_META = {"Software": None}


def _plt():
    import matplotlib
    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt
    return plt


def write_tsv(path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")


def save_epoch_report(outdir, rows, name: str = "epochs") -> None:
    """Per-epoch TSV (epoch, gamma, objective, valid_rmse) plus learning curves."""
    outdir = Path(outdir)
    lines = ["epoch\tgamma\tobjective\tvalid_rmse"]
    for r in rows:
        vr = "" if math.isnan(r.valid_rmse) else f"{r.valid_rmse:.6f}"
        lines.append(f"{r.epoch}\t{r.gamma:.8g}\t{r.objective:.6f}\t{vr}")
    write_tsv(outdir / f"{name}.tsv", lines)
    if not rows:
        return
    plt = _plt()
    fig, ax1 = plt.subplots(figsize=(6, 4))
    epochs = [r.epoch for r in rows]
    ax1.plot(epochs, [r.objective for r in rows], color="tab:blue", label="objective")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("training objective", color="tab:blue")
    if any(not math.isnan(r.valid_rmse) for r in rows):
        ax2 = ax1.twinx()
        ax2.plot(epochs, [r.valid_rmse for r in rows], color="tab:red", label="valid RMSE")
        ax2.set_ylabel("validation RMSE", color="tab:red")
    fig.tight_layout()
    fig.savefig(outdir / f"{name}.png", metadata=PNG_META)
    plt.close(fig)


def save_eval_report(outdir, report, name: str = "eval") -> None:
    """Model-comparison TSV plus an RMSE bar chart."""
    outdir = Path(outdir)
    write_tsv(outdir / f"{name}.tsv", report.tsv_lines())
    if not report.rows:
        return
    plt = _plt()
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(report.rows)), 4))
    names = [r[0] for r in report.rows]
    errs = [r[1] for r in report.rows]
    ax.bar(names, errs, color="tab:blue")
    ax.set_ylabel("validation RMSE")
    ax.set_ylim(bottom=0)
    for tick in ax.get_xticklabels():
        tick.set_rotation(30)
        tick.set_ha("right")
    fig.tight_layout()
    fig.savefig(outdir / f"{name}.png", metadata=PNG_META)
    plt.close(fig)


def save_blend_report(outdir, report, name: str = "blend_report") -> None:
    """Blend weights/RMSE TSV plus per-model vs blend bar chart."""
    outdir = Path(outdir)
    write_tsv(outdir / f"{name}.tsv", report.tsv_lines())
    plt = _plt()
    names = list(report.weights.names) + ["blend"]
    errs = [report.model_rmse[n] for n in report.weights.names] + [report.blend_rmse]
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(names)), 4))
    colors = ["tab:blue"] * (len(names) - 1) + ["tab:green"]
    ax.bar(names, errs, color=colors)
    ax.set_ylabel("validation RMSE")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(outdir / f"{name}.png", metadata=PNG_META)
    plt.close(fig)


def save_bench_report(outdir, report, name: str = "bench") -> None:
    """Benchmark TSV plus speedup, D-scaling and iteration-time figures."""
    outdir = Path(outdir)
    write_tsv(outdir / f"{name}.tsv", report.tsv_lines())
    if not report.rows:
        return
    plt = _plt()
    algos = sorted({r.algo for r in report.rows})

    thread_rows = {}
    for r in report.rows:
        thread_rows.setdefault((r.algo, r.D), []).append(r)
    sweep = {k: sorted(v, key=lambda r: r.threads)
             for k, v in thread_rows.items() if len({r.threads for r in v}) > 1}
    if sweep:
        fig, ax = plt.subplots(figsize=(6, 4))
        for (algo, d), rows in sorted(sweep.items()):
            ax.plot([r.threads for r in rows], [r.speedup for r in rows],
                    marker="o", label=f"{algo} (D={d})")
        ts = sorted({r.threads for rows in sweep.values() for r in rows})
        ax.plot(ts, ts, linestyle="--", color="gray", label="ideal")
        ax.set_xlabel("threads")
        ax.set_ylabel("speedup vs 1 thread")
        ax.legend()
        fig.tight_layout()
        fig.savefig(outdir / f"{name}_speedup.png", metadata=PNG_META)
        plt.close(fig)

    d_rows = {}
    for r in report.rows:
        d_rows.setdefault(r.algo, {}).setdefault(r.D, []).append(r)
    scaling = {a: sorted(ds) for a, ds in d_rows.items() if len(ds) > 1}
    if scaling:
        fig, ax = plt.subplots(figsize=(6, 4))
        for algo, ds in sorted(scaling.items()):
            times = [min(r.iter_ms for r in d_rows[algo][d]) for d in ds]
            ax.plot(ds, times, marker="o", label=algo)
        ax.set_xlabel("feature dimension D")
        ax.set_ylabel("iteration time (ms)")
        ax.legend()
        fig.tight_layout()
        fig.savefig(outdir / f"{name}_dscaling.png", metadata=PNG_META)
        plt.close(fig)

    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(algos)), 4))
    best = {a: min(r.iter_ms for r in report.rows if r.algo == a) for a in algos}
    ax.bar(list(best.keys()), list(best.values()), color="tab:blue")
    ax.set_ylabel("best iteration time (ms)")
    fig.tight_layout()
    fig.savefig(outdir / f"{name}_itertime.png", metadata=PNG_META)
    plt.close(fig)
