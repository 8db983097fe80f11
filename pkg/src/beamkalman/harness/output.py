"""CSV artifacts and the companion plotting script."""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, fields
from pathlib import Path

import numpy as np

from ..beamspace import beam_pattern
from .config import ExperimentConfig
from .experiment import FilterPlan, ResultRow, final_rows, summarize

ROW_FIELDS = [f.name for f in fields(ResultRow)]
_CASTS = {f.name: f.type for f in fields(ResultRow)}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def parse_rows(text: str) -> list[ResultRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != ROW_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    casts = {"epoch": int, "dimension": int, "trial": int, "beamformer": str}
    return [
        ResultRow(**{k: casts.get(k, float)(v) for k, v in rec.items()})
        for rec in reader
    ]


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit(rows, path, fmt: str = "csv") -> Path:
    """Write ``rows`` to ``path`` as CSV, or a plotting script for the CSVs."""
    path = Path(path)
    if fmt == "csv":
        return _write(path, rows_to_csv(rows))
    if fmt == "plot-script":
        return _write(path, PLOT_SCRIPT)
    raise ValueError(f"unknown output format {fmt!r}")


def summary_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beamformer", "dimension", "epoch", "mse", "sq_error_mean", "sq_error_se", "trials"])
    mse = summarize(rows, "mse")
    err = summarize(rows, "sq_error")
    for key in sorted(mse):
        kind, dim, epoch = key
        m, _, count = mse[key]
        e, se, _ = err[key]
        writer.writerow([kind, dim, epoch, repr(m), repr(e), repr(se), count])
    return buf.getvalue()


def beam_pattern_csv(config: ExperimentConfig, plans: list[FilterPlan]) -> str:
    """Gain in dB versus azimuth for each kind at ``config.pattern_dim``.

    Sequential designs contribute their first and last block.
    """
    step = config.pattern_step
    grid = np.arange(-90.0 + step, 90.0, step)
    grid = grid[np.abs(grid) < 90.0]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beamformer", "dimension", "block", "azimuth_deg", "gain_db"])
    for plan in plans:
        if plan.dimension != config.pattern_dim and plan.kind != "identity":
            continue
        blocks = [0] if len(plan.beamformers) == 1 else [0, len(plan.beamformers) - 1]
        for b in blocks:
            gain = beam_pattern(plan.beamformers[b], config.geometry, grid)
            for az, g in zip(grid, gain):
                writer.writerow([plan.kind, plan.dimension, b, repr(round(float(az), 10)), repr(float(g))])
    return buf.getvalue()


def selection_trace_csv(plans: list[FilterPlan]) -> str:
    """Which eigen-direction ``(delay, index)`` each GEB block used."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["beamformer", "dimension", "block", "delay", "index", "ledger_value", "overlap"])
    for plan in plans:
        if not plan.kind.startswith("geb"):
            continue
        for m, bf in enumerate(plan.beamformers):
            for l, (idx, vals) in enumerate(zip(bf.selection, bf.selected_values)):
                for i, v in zip(idx, vals):
                    writer.writerow([plan.kind, plan.dimension, m, l, int(i), repr(float(v)), repr(bf.overlap)])
    return buf.getvalue()


def write_outputs(config: ExperimentConfig, rows, plans, out_dir, plot_script: bool = False) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        emit(final_rows(rows), out / "mse_vs_dim.csv"),
        emit(rows, out / "mse_vs_time.csv"),
        _write(out / "summary.csv", summary_csv(rows)),
        _write(out / "beam_pattern.csv", beam_pattern_csv(config, plans)),
        _write(out / "selection_trace.csv", selection_trace_csv(plans)),
    ]
    if plot_script:
        written.append(emit(rows, out / "plot_results.py", "plot-script"))
    return written


PLOT_SCRIPT = '''"""Plot the CSV outputs of a beamkalman run (needs pandas and matplotlib).

Usage: python plot_results.py [output_dir]
"""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")

dim = pd.read_csv(out / "mse_vs_dim.csv").groupby(["beamformer", "dimension"])["mse"].mean().reset_index()
fig, ax = plt.subplots()
for kind, grp in dim.groupby("beamformer"):
    ax.semilogy(grp["dimension"], grp["mse"], "o-", label=kind)
ax.set_xlabel("pre-beamformer dimension D")
ax.set_ylabel("Tr(P)/K")
ax.legend()
fig.savefig(out / "mse_vs_dim.png", dpi=150)

time = pd.read_csv(out / "mse_vs_time.csv").groupby(["beamformer", "dimension", "epoch"])["mse"].mean().reset_index()
fig, ax = plt.subplots()
for (kind, d), grp in time.groupby(["beamformer", "dimension"]):
    ax.semilogy(grp["epoch"] + 1, grp["mse"], label=f"{kind} D={d}")
ax.set_xlabel("training symbols")
ax.set_ylabel("Tr(P)/K")
ax.legend(fontsize="small")
fig.savefig(out / "mse_vs_time.png", dpi=150)

pat = pd.read_csv(out / "beam_pattern.csv")
fig, ax = plt.subplots()
for (kind, d, b), grp in pat.groupby(["beamformer", "dimension", "block"]):
    g = grp["gain_db"] - grp["gain_db"].max()
    ax.plot(grp["azimuth_deg"], g, label=f"{kind} D={d} block {b}")
ax.set_xlabel("azimuth (deg)")
ax.set_ylabel("normalized gain (dB)")
ax.set_ylim(-80, 5)
ax.legend(fontsize="small")
fig.savefig(out / "beam_pattern.png", dpi=150)
'''
