"""Figure rendering for suite reports: PNG files alongside the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_suite_figure(outdir: str | Path, suite_dict: dict) -> Path | None:
    """One figure per suite: estimates with 3-SE bars against their bounds."""
    rows = suite_dict.get("rows", [])
    if not rows:
        return None
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    name = suite_dict["suite"]
    path = outdir / f"{name}.png"

    fig, ax = plt.subplots(figsize=(6, 4))
    if name == "harnack":
        labels = [f"t={r['t']:g}\n{r['f']}" for r in rows]
        margins = [r["margin"] for r in rows]
        errs = [3 * r["std_error"] for r in rows]
        xs = np.arange(len(rows))
        ax.bar(xs, margins, yerr=errs, color=["tab:green" if r["pass"] else "tab:red" for r in rows])
        ax.axhline(0.0, color="k", lw=0.8)
        ax.set_xticks(xs, labels, fontsize=6, rotation=45)
        ax.set_ylabel("inequality margin")
    else:
        ts = [r["t"] for r in rows]
        est = [r["estimate"] for r in rows]
        se = [3 * r["std_error"] for r in rows]
        bound = [r["bound"] for r in rows]
        ax.errorbar(ts, est, yerr=se, marker="o", label="Monte Carlo")
        ax.plot(ts, bound, "--", color="tab:red", label="bound")
        positive = all(v > 0 for v in est + bound)
        if positive and max(bound) / max(min(est), 1e-300) > 50:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(name)
        ax.legend()
    ax.set_title(f"{name}: {'pass' if suite_dict.get('pass') else 'FAIL'}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_series_figure(outdir: str | Path, name: str, times, series: dict[str, np.ndarray]) -> Path:
    """Generic time-series figure (coupling distance, weight, path norms)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"{name}.png"
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, values in series.items():
        ax.plot(times, values, label=label)
    ax.set_xlabel("t")
    ax.legend()
    ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
