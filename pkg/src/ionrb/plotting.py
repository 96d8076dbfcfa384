"""SVG figures and CSV tables for campaign reports.

Uses the non-interactive Agg backend so reports render on headless machines.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import FitResult, SweepResult, decay_model  # noqa: E402
from .detector import CountHistogram  # noqa: E402

plt.rcParams.update({"svg.hashsalt": "ionrb", "font.size": 9, "axes.grid": True, "grid.alpha": 0.3})
_SVG_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def plot_decay(fit: FitResult, path) -> Path:
    """Per-length mean fidelity with error bars and the fitted decay."""
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.errorbar(fit.lengths, fit.mean_fidelity, yerr=fit.sem, fmt="o", ms=4, capsize=2, label="mean fidelity")
    l = np.linspace(0, max(fit.lengths) * 1.05, 400)
    ax.plot(l, decay_model(l, fit.epg, fit.dif), "k-", lw=1,
            label=f"fit: EPG {fit.epg:.2e}, d_if {fit.dif:.2e}")
    ax.set_xlabel("sequence length (computational gates)")
    ax.set_ylabel("fidelity")
    ax.legend(loc="lower left", fontsize=8)
    return _save(fig, path)


def plot_reference_histogram(bright: CountHistogram, dark: CountHistogram, threshold: int, path) -> Path:
    """Summed bright and dark reference counts with the detection threshold."""
    size = max(max(bright.counts, default=0), max(dark.counts, default=0)) + 1
    b, d = bright.as_array(size), dark.as_array(size)
    k = np.arange(size)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar(k, d, width=0.9, color="0.3", label="dark reference")
    ax.bar(k, b, width=0.9, bottom=d, color="tab:blue", alpha=0.8, label="bright reference")
    ax.axvline(threshold + 0.5, color="red", lw=1.2, label=f"threshold (> {threshold} reads bright)")
    ax.set_yscale("log")
    ax.set_xlabel("photon counts")
    ax.set_ylabel("occurrences")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_calibration_log(entries: list[dict], path) -> Path:
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(5.0, 4.2), sharex=True)
    freq = [e for e in entries if e["kind"] == "frequency"]
    pi2 = [e for e in entries if e["kind"] == "pi2"]
    top.plot([e["time_s"] for e in freq], [e["detuning_residual_hz"] for e in freq], ".-")
    top.set_ylabel("frequency residual (Hz)")
    bottom.plot([e["time_s"] for e in pi2], [1e9 * e["pi2_residual_s"] for e in pi2], ".-", color="tab:orange")
    bottom.set_ylabel("pi/2 residual (ns)")
    bottom.set_xlabel("simulated time (s)")
    return _save(fig, path)


def plot_sweep(result: SweepResult, axis: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(result.x, result.epg, "o", label="simulated EPG")
    x = np.linspace(0, max(result.x), 200)
    ax.plot(x, result.predict(x), "k-", lw=1, label=f"c = {result.coefficient:.3e} {result.coefficient_unit}")
    ax.set_xlabel(f"{axis} ({result.x_unit})")
    ax.set_ylabel("EPG")
    ax.legend(fontsize=8)
    return _save(fig, path)


def write_fidelity_table(fit: FitResult, path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length", "mean_fidelity", "sem", "model", "residual"])
        model = decay_model(fit.lengths, fit.epg, fit.dif)
        for row in zip(fit.lengths, fit.mean_fidelity, fit.sem, model, fit.residuals):
            w.writerow([int(row[0])] + [f"{v:.8g}" for v in row[1:]])
    return Path(path)


def write_success_histogram(records, path) -> Path:
    """Number of sequences at each (length, success fraction)."""
    table: dict[tuple[int, float], int] = {}
    for r in records:
        key = (r.length, round(r.success_fraction, 6))
        table[key] = table.get(key, 0) + 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length", "success_fraction", "sequences"])
        for (l, f), n in sorted(table.items()):
            w.writerow([l, f"{f:.6g}", n])
    return Path(path)
