"""SVG figures, each written next to a CSV with the plotted data.

Figures are rendered with a fixed hash salt and no date metadata so the
same data always produces the same bytes.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

PROFILE_COLORS = {"low": "#1b9e77", "medium": "#7570b3", "high": "#d95f02", "unassigned": "#999999"}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in r])


def _save(fig, path, stamp: str) -> None:
    with plt.rc_context({"svg.hashsalt": "ppm-qrf", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None, "Description": stamp})
    plt.close(fig)


def interval_plot(path, actual, point, lower, upper, stamp: str, max_points: int = 400) -> None:
    """Actual value, point prediction and interval per instance, sorted by point.

    At most ``max_points`` evenly spaced instances are drawn; the CSV twin
    always holds every instance.
    """
    y, pt, lo, hi = (np.asarray(v, dtype=float) for v in (actual, point, lower, upper))
    order = np.argsort(pt, kind="stable")
    covered = (lo <= y) & (y <= hi)
    base = os.path.splitext(path)[0]
    write_csv(base + ".csv", ["instance_id", "actual", "point", "lower", "upper", "covered"],
              [(int(i), y[i], pt[i], lo[i], hi[i], int(covered[i])) for i in range(len(y))])
    shown = order if len(order) <= max_points else order[np.linspace(0, len(order) - 1, max_points).astype(int)]
    xs = np.arange(len(shown))
    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.fill_between(xs, lo[shown], hi[shown], color="#a6cee3", alpha=0.6, step="mid", label="interval")
    ax.plot(xs, pt[shown], color="#1f78b4", lw=1.0, label="point")
    ax.scatter(xs, y[shown], s=6, c=np.where(covered[shown], "#333333", "#e31a1c"), label="actual", zorder=3)
    ax.set_xlabel("instance (sorted by point prediction)")
    ax.set_ylabel("processing time [min]")
    ax.set_title(f"prediction intervals, PICP={covered.mean():.3f}")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    _save(fig, path, stamp)


def profile_plot(path, point, rwidth, labels, low_cut: float, high_cut: float, stamp: str) -> None:
    pt, rw = np.asarray(point, dtype=float), np.asarray(rwidth, dtype=float)
    base = os.path.splitext(path)[0]
    write_csv(base + ".csv", ["instance_id", "point", "rwidth", "profile"],
              [(i, pt[i], rw[i], labels[i]) for i in range(len(pt))])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for lab, color in PROFILE_COLORS.items():
        mask = np.array([l == lab for l in labels], dtype=bool)
        if mask.any():
            ax.scatter(pt[mask], rw[mask], s=6, c=color, label=f"{lab} ({int(mask.sum())})")
    ax.axhline(low_cut, color="#555555", ls="--", lw=0.8)
    ax.axhline(high_cut, color="#555555", ls="--", lw=0.8)
    ax.set_xlabel("point prediction [min]")
    ax.set_ylabel("relative interval width")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path, stamp)


def importance_plot(path, importance, n_explained: int, target: str, stamp: str, top_k: int = 15) -> None:
    base = os.path.splitext(path)[0]
    write_csv(base + ".csv", ["feature", "mean_abs_phi", "n_explained"],
              [(name, v, n_explained) for name, v in importance])
    top = list(importance)[:top_k][::-1]
    fig, ax = plt.subplots(figsize=(7, 0.35 * len(top) + 1.2))
    ax.barh([n for n, _ in top], [v for _, v in top], color="#1f78b4")
    ax.set_xlabel("mean |SHAP value|")
    ax.set_title(f"{target}: global importance (n={n_explained})")
    fig.tight_layout()
    _save(fig, path, stamp)


def summary_plot(path, rows, target: str, n_explained: int, stamp: str, seed: int = 0) -> None:
    """Beeswarm-style view of ``(feature, value, phi)`` rows.

    Numeric values are color-scaled within each feature; categorical and
    missing values are drawn in grey.
    """
    base = os.path.splitext(path)[0]
    write_csv(base + ".csv", ["feature", "feature_value", "phi"], rows)
    features = list(dict.fromkeys(r[0] for r in rows))
    rng = np.random.default_rng(seed)
    fig, ax = plt.subplots(figsize=(7, 0.4 * max(len(features), 1) + 1.2))
    for k, name in enumerate(features):
        sub = [r for r in rows if r[0] == name]
        phi = np.array([r[2] for r in sub])
        vals = [r[1] for r in sub]
        numeric = all(isinstance(v, (int, float)) for v in vals)
        ypos = len(features) - 1 - k + rng.uniform(-0.25, 0.25, size=len(sub))
        if numeric and len(vals):
            v = np.asarray(vals, dtype=float)
            span = v.max() - v.min()
            c = (v - v.min()) / span if span > 0 else np.full(len(v), 0.5)
            ax.scatter(phi, ypos, s=8, c=c, cmap="coolwarm", vmin=0, vmax=1)
        else:
            ax.scatter(phi, ypos, s=8, c="#888888")
    ax.set_yticks(range(len(features)))
    ax.set_yticklabels(features[::-1])
    ax.axvline(0.0, color="#555555", lw=0.8)
    ax.set_xlabel("SHAP value")
    ax.set_title(f"{target}: summary (n={n_explained})")
    fig.tight_layout()
    _save(fig, path, stamp)
