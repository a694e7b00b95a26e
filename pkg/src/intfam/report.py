"""Render experiment figures from results and energy tables.

The run tooling emits plain CSV; this module turns one or more such files
into the standard set of figures: error against communication volume, error
progress over rounds, and the energy scaling curves. Rendering is headless
(Agg backend) and writes PNG files next to the delimited outputs.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .simulator import RESULTS_HEADER, RoundRecord

ENERGY_HEADER = ("m", "central_wh", "parallel_wh", "ratio")


def read_results(path) -> list[RoundRecord]:
    """Parse a results CSV back into records; comment lines are ignored."""
    records: list[RoundRecord] = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = tuple(next(reader, ()))
        if header != RESULTS_HEADER:
            raise ValueError(f"{path}: unexpected results header {header}")
        for row in reader:
            t, errs, samples, up, down, viol, full, part = (int(v) for v in row)
            records.append(RoundRecord(t, errs, samples, errs, up, down, viol, full, part))
    if not records:
        raise ValueError(f"{path}: no data rows")
    return records


def read_energy_table(path) -> list[tuple[int, float, float, float]]:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = tuple(next(reader, ()))
        if header != ENERGY_HEADER:
            raise ValueError(f"{path}: unexpected energy header {header}")
        rows = [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in reader]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def tradeoff_figure(named_runs: Sequence[tuple[str, Sequence[RoundRecord]]], out_path) -> None:
    """Final error rate against total transferred bytes, one marker per run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, records in named_runs:
        last = records[-1]
        total = last.bytes_up + last.bytes_down
        ax.scatter([total], [last.error_rate], label=name)
    ax.set_xlabel("total bytes transferred")
    ax.set_ylabel("final error rate")
    totals = [r[-1].bytes_up + r[-1].bytes_down for _, r in named_runs]
    if min(totals) > 0 and max(totals) / max(min(totals), 1) > 100:
        ax.set_xscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def progress_figure(named_runs: Sequence[tuple[str, Sequence[RoundRecord]]], out_path) -> None:
    """Cumulative error rate per round for each run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, records in named_runs:
        ax.plot([r.t for r in records], [r.error_rate for r in records], label=name)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative error rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)


def energy_figures(rows: Sequence[tuple[int, float, float, float]], consumption_path, ratio_path) -> None:
    """Energy per approach and their ratio across learner counts."""
    ms = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ms, [r[1] for r in rows], marker="o", label="centralized")
    ax.plot(ms, [r[2] for r in rows], marker="s", label="parallel")
    ax.set_xlabel("learners")
    ax.set_ylabel("energy (Wh)")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(consumption_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ms, [r[3] for r in rows], marker="o")
    ax.set_xlabel("learners")
    ax.set_ylabel("central / parallel energy")
    fig.tight_layout()
    fig.savefig(ratio_path, dpi=150)
    plt.close(fig)


def render_report(results_paths: Sequence, energy_path, out_dir) -> list[Path]:
    """Render every figure the inputs support; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if results_paths:
        named = [(Path(p).stem, read_results(p)) for p in results_paths]
        tradeoff = out_dir / "tradeoff.png"
        progress = out_dir / "progress.png"
        tradeoff_figure(named, tradeoff)
        progress_figure(named, progress)
        written += [tradeoff, progress]
    if energy_path is not None:
        rows = read_energy_table(energy_path)
        consumption = out_dir / "energy_consumption.png"
        ratio = out_dir / "energy_ratio.png"
        energy_figures(rows, consumption, ratio)
        written += [consumption, ratio]
    return written
