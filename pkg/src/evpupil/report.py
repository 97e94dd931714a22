"""Figure rendering for the report paths (PR curves, trajectories)."""

from __future__ import annotations

import os
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .track import SaccadeInterval, Trajectory, VelocitySample

__all__ = ["render_pr_curve", "render_trajectory"]


def render_pr_curve(
    points: Sequence[tuple[float, float, float]],
    path: Union[str, os.PathLike],
    ap: Optional[float] = None,
) -> None:
    """Plot precision against recall for a swept confidence threshold."""
    fig, ax = plt.subplots(figsize=(5, 4))
    if points:
        recalls = [r for _, _, r in points]
        precisions = [p for _, p, _ in points]
        ax.plot(recalls, precisions, marker="o", markersize=3, lw=1.2, color="#1f77b4")
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    title = "precision-recall"
    if ap is not None:
        title += f" (AP={ap:.3f})"
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_trajectory(
    trajectory: Trajectory,
    samples: Sequence[VelocitySample],
    path: Union[str, os.PathLike],
    saccades: Sequence[SaccadeInterval] = (),
    threshold_deg_s: Optional[float] = None,
) -> None:
    """Two panels: pupil center over time, and speed with saccade bands."""
    t_ms = [p.t_mid_us / 1000.0 for p in trajectory.points]
    fig, (ax_pos, ax_spd) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)

    ax_pos.plot(t_ms, [p.cx for p in trajectory.points], lw=1.0, label="cx")
    ax_pos.plot(t_ms, [p.cy for p in trajectory.points], lw=1.0, label="cy")
    interp = [p for p in trajectory.points if p.source == "interpolated"]
    if interp:
        ax_pos.scatter(
            [p.t_mid_us / 1000.0 for p in interp],
            [p.cx for p in interp],
            s=12, color="crimson", zorder=3, label="interpolated",
        )
    ax_pos.set_ylabel("center [px]")
    ax_pos.legend(loc="best", fontsize=8)
    ax_pos.grid(True, alpha=0.3)

    calibrated = samples and samples[0].speed_deg_s is not None
    if calibrated:
        ax_spd.plot(t_ms, [v.speed_deg_s for v in samples], lw=1.0, color="#2ca02c")
        ax_spd.set_ylabel("speed [deg/s]")
        if threshold_deg_s is not None:
            ax_spd.axhline(threshold_deg_s, color="gray", ls="--", lw=0.8)
    else:
        ax_spd.plot(t_ms, [v.speed_px_s for v in samples], lw=1.0, color="#2ca02c")
        ax_spd.set_ylabel("speed [px/s]")
    for s in saccades:
        ax_spd.axvspan(s.onset_us / 1000.0, s.offset_us / 1000.0, color="orange", alpha=0.25)
    ax_spd.set_xlabel("time [ms]")
    ax_spd.grid(True, alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
