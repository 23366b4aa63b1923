"""Matplotlib rendering of DET curves to image files.

Kept separate from the metric code so importing the library never pulls
in a plotting backend; only report generation pays that cost.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_det_curves(curves, path, target_fa_per_hour: float = 1.0) -> Path:
    """Plot FR%% against FA/hour for each named curve and save a PNG.

    curves maps a test-set name to its DetCurvePoint sequence. The target
    false-alarm rate is drawn as a vertical guide.
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for name, points in curves.items():
        pts = sorted(points, key=lambda p: p.threshold)
        fa = [p.fa_per_hour for p in pts]
        fr = [100.0 * p.fr_rate for p in pts]
        ax.plot(fa, fr, marker=".", markersize=3, linewidth=1.2, label=name)
    ax.axvline(target_fa_per_hour, color="gray", linestyle=":", linewidth=1.0)
    ax.set_xlabel("false alarms per hour")
    ax.set_ylabel("false rejection rate (%)")
    ax.set_title("detection error tradeoff")
    ax.set_ylim(-2, 102)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
