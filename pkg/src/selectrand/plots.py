"""Figure rendering for experiment outputs.

Figures are regenerated purely from the CSV emitted by the experiment run,
so a figure can always be rebuilt from archived results without re-running
any simulation.
"""

from __future__ import annotations

import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def read_rows(csv_path):
    """Load experiment rows as a list of dicts with typed fields."""
    rows = []
    with open(csv_path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append({
                "rep": int(rec["rep"]) if rec["rep"] != "" else None,
                "arm": rec["arm"],
                "metric": rec["metric"],
                "x": float(rec["x"]) if rec["x"] != "" else None,
                "value": float(rec["value"]),
            })
    return rows


def _series(rows, arm, metric):
    pts = [(r["x"], r["value"]) for r in rows
           if r["arm"] == arm and r["metric"] == metric]
    pts.sort(key=lambda t: (t[0] is None, t[0]))
    return (np.array([p[0] for p in pts], dtype=float),
            np.array([p[1] for p in pts], dtype=float))


def _values(rows, arm, metric):
    return np.array([r["value"] for r in rows
                     if r["arm"] == arm and r["metric"] == metric])


def plot_consistency(rows, out_path):
    hist_metrics = sorted({r["metric"] for r in rows
                           if r["metric"].startswith("hist_")})
    arms = sorted({r["arm"] for r in rows if r["arm"] != "nominal"})
    fig, axes = plt.subplots(1, len(hist_metrics),
                             figsize=(5 * len(hist_metrics), 4), squeeze=False)
    for ax, metric in zip(axes[0], hist_metrics):
        n = metric.replace("hist_n", "")
        for arm in arms:
            x, v = _series(rows, arm, metric)
            if x.size:
                ax.step(x, v, where="mid", label=arm)
            mean = _values(rows, arm, "mean_reported")
        ax.set_title(f"reported mean, n={n}")
        ax.set_xlabel("reported sample mean")
        ax.set_ylabel("density")
        ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_ci(rows, out_path):
    arms = sorted({r["arm"] for r in rows
                   if r["metric"] in ("lower", "upper")})
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
    for arm in arms:
        x, lo = _series(rows, arm, "lower")
        _, hi = _series(rows, arm, "upper")
        style = "--" if arm == "nominal" else "-"
        ax1.plot(x, lo, style, label=f"{arm} lower")
        ax1.plot(x, hi, style, label=f"{arm} upper")
    ax1.set_xlabel("observed mean")
    ax1.set_ylabel("interval endpoint")
    ax1.set_title("selective confidence intervals")
    ax1.legend(fontsize=7)
    for arm in arms:
        x, ratio = _series(rows, arm, "length_ratio")
        if x.size:
            ax2.plot(x, ratio, label=arm)
    ax2.axhline(1.0, color="gray", lw=0.8)
    ax2.set_xlabel("observed mean")
    ax2.set_ylabel("length / nominal length")
    ax2.set_title("interval length inflation")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_roc(rows, out_path):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    families = defaultdict(list)
    for r in rows:
        if r["metric"] == "screening":
            fam = r["arm"].rsplit("_", 1)[0]
            t2 = [q["value"] for q in rows
                  if q["arm"] == r["arm"] and q["metric"] == "type_ii"]
            if t2:
                families[fam].append((r["value"], t2[0], r["arm"]))
    markers = {"additive": "o", "carving": "s", "splitting": "^"}
    for fam, pts in sorted(families.items()):
        pts.sort()
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, marker=markers.get(fam, "x"), label=fam)
        for x, y, label in pts:
            ax.annotate(label.rsplit("_", 1)[1], (x, y), fontsize=6,
                        xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("screening probability")
    ax.set_ylabel("Type II error")
    ax.set_title("power/screening trade-off")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_median(rows, out_path):
    arms = sorted({r["arm"] for r in rows if r["metric"] == "pivot"})
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for arm in arms:
        piv = np.sort(_values(rows, arm, "pivot"))
        ecdf = np.arange(1, piv.size + 1) / piv.size
        ax.step(piv, ecdf, where="post", label=f"{arm} (m={piv.size})")
    ax.plot([0, 1], [0, 1], "k--", lw=0.8, label="Unif(0,1)")
    ax.set_xlabel("selective pivot")
    ax.set_ylabel("empirical CDF")
    ax.set_title("best-median pivots")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


RENDERERS = {
    "consistency": plot_consistency,
    "ci": plot_ci,
    "roc": plot_roc,
    "median": plot_median,
}


def render(experiment, csv_path, out_path):
    if experiment not in RENDERERS:
        raise KeyError(f"no figure defined for {experiment!r}")
    RENDERERS[experiment](read_rows(csv_path), out_path)
