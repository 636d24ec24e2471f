# Static rate-versus-blocklength figures from curve rows
import math
import logging
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
from matplotlib import pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

PALETTE = ['#1f77b4', '#ff7f0e', '#2ca02c', '#d62728', '#9467bd', '#8c564b', '#e377c2', '#7f7f7f']
MARKERS = {"THM2_EXACT": "o", "THM2_BERRY_ESSEEN": "s", "THM3_BSC": "o", "THM4_BEC": "D", "SIMULATION": "x"}


# Rate log2 M / log2 n against n on a log axis, one series per method. A dashed
# line marks the capacity (rank - 1)/2 and a dotted one half of it. Rows with
# a non-finite rate are left out.
def plot_rate_curves(rows, output, title=None):
    if not rows:
        raise ValueError("nothing to plot")
    series = defaultdict(list)
    for row in rows:
        if math.isfinite(row["rate"]):
            series[row["method"]].append((row["n"], row["rate"]))
    capacity = rows[0]["capacity"]

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for color, (method, points) in zip(PALETTE, sorted(series.items())):
        points.sort()
        ns, rates = zip(*points)
        ax.plot(ns, rates, label=method, color=color, marker=MARKERS.get(method), markersize=3, linewidth=1.5)
    ax.axhline(capacity, color="k", linestyle="--", linewidth=1, label=f"capacity {capacity:g}")
    ax.axhline(capacity / 2, color="gray", linestyle=":", linewidth=1, label="half capacity")
    ax.set_xscale("log")
    ax.set_xlabel("blocklength n")
    ax.set_ylabel("rate log2 M / log2 n")
    ax.set_ylim(bottom=0)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", fontsize="small")
    fig.tight_layout()
    output = Path(output)
    fig.savefig(output, dpi=150)
    plt.close(fig)
    logger.info("wrote %s", output)
    return output
