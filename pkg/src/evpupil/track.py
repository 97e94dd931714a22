"""Assemble per-frame detections into pupil trajectories.

Each detected frame contributes one point at its window midpoint (a 10 ms
accumulation has no single instant; the midpoint minimizes worst-case
bias). Missing frames stay as explicit gaps until interpolation fills the
short ones. Speeds come from central differences on interior points and
one-sided differences at the ends; angular speed needs a user-supplied
pixels-per-degree calibration.
"""

from __future__ import annotations

import os
import re
import warnings
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .detect import Detection
from .framegen import WindowPlan

__all__ = [
    "SaccadeInterval",
    "Trajectory",
    "TrajectoryPoint",
    "VelocitySample",
    "build_trajectory",
    "detections_by_frame_index",
    "flag_saccade_candidates",
    "frame_index_from_ref",
    "interpolate_gaps",
    "velocity",
    "write_saccades_csv",
    "write_trajectory_csv",
]

_INDEX_RE = re.compile(r"(\d+)\.[A-Za-z0-9]+$")


def frame_index_from_ref(frame_ref: str) -> int:
    """Window ordinal from a frame filename like ``frame_000012.png``."""
    m = _INDEX_RE.search(frame_ref)
    if not m:
        raise ValueError(f"cannot extract a frame index from {frame_ref!r}")
    return int(m.group(1))


@dataclass(frozen=True)
class TrajectoryPoint:
    frame_index: int
    t_mid_us: float
    cx: float
    cy: float
    source: str  # "detected" | "interpolated"
    confidence: float


@dataclass
class Trajectory:
    points: list[TrajectoryPoint]
    window_duration_us: int

    def __len__(self) -> int:
        return len(self.points)

    def gaps(self) -> list[tuple[int, int]]:
        """Inclusive (first, last) missing frame-index ranges between points."""
        out = []
        for a, b in zip(self.points, self.points[1:]):
            if b.frame_index - a.frame_index > 1:
                out.append((a.frame_index + 1, b.frame_index - 1))
        return out


def detections_by_frame_index(
    detections: Mapping[str, Sequence[Detection]]
) -> dict[int, list[Detection]]:
    """Regroup a frame_ref-keyed detection mapping by window ordinal."""
    out: dict[int, list[Detection]] = {}
    for ref, dets in detections.items():
        out.setdefault(frame_index_from_ref(ref), []).extend(dets)
    return out


def build_trajectory(
    detections: Mapping[int, Sequence[Detection]],
    plans: Sequence[WindowPlan],
) -> Trajectory:
    """One point per detected frame, timestamped at the window midpoint.

    Duplicate detections on one frame keep the highest confidence (warned).
    Frames without detections are left as gaps.
    """
    if not plans:
        raise ValueError("no window plans supplied")
    plan_by_index = {p.index: p for p in plans}
    duration = plans[0].t_end - plans[0].t_start
    unknown = sorted(set(detections) - set(plan_by_index))
    if unknown:
        raise ValueError(f"detections reference unknown windows: {unknown}")

    points = []
    for index in sorted(detections):
        dets = list(detections[index])
        if not dets:
            continue
        if len(dets) > 1:
            warnings.warn(
                f"frame {index}: {len(dets)} detections, keeping highest confidence",
                UserWarning,
                stacklevel=2,
            )
        best = max(dets, key=lambda d: d.confidence)
        cx, cy = best.center()
        plan = plan_by_index[index]
        points.append(
            TrajectoryPoint(
                frame_index=index,
                t_mid_us=plan.t_mid,
                cx=cx,
                cy=cy,
                source="detected",
                confidence=best.confidence,
            )
        )
    return Trajectory(points=points, window_duration_us=duration)


def interpolate_gaps(trajectory: Trajectory, max_gap_frames: int) -> Trajectory:
    """Fill gaps of at most max_gap_frames missing frames by linear
    interpolation against time; longer gaps stay open. Idempotent."""
    if max_gap_frames < 0:
        raise ValueError("max_gap_frames must be nonnegative")
    pts = trajectory.points
    out: list[TrajectoryPoint] = []
    for a, b in zip(pts, pts[1:]):
        out.append(a)
        missing = b.frame_index - a.frame_index - 1
        if 0 < missing <= max_gap_frames:
            for k in range(a.frame_index + 1, b.frame_index):
                t = a.t_mid_us + (k - a.frame_index) * trajectory.window_duration_us
                alpha = (t - a.t_mid_us) / (b.t_mid_us - a.t_mid_us)
                out.append(
                    TrajectoryPoint(
                        frame_index=k,
                        t_mid_us=t,
                        cx=a.cx + alpha * (b.cx - a.cx),
                        cy=a.cy + alpha * (b.cy - a.cy),
                        source="interpolated",
                        confidence=min(a.confidence, b.confidence),
                    )
                )
    if pts:
        out.append(pts[-1])
    return Trajectory(points=out, window_duration_us=trajectory.window_duration_us)


@dataclass(frozen=True)
class VelocitySample:
    t_mid_us: float
    speed_px_s: float
    speed_deg_s: Optional[float] = None


def velocity(
    trajectory: Trajectory, px_per_degree: Optional[float] = None
) -> list[VelocitySample]:
    """Speed at every trajectory point (px/s, and deg/s when calibrated)."""
    pts = trajectory.points
    if len(pts) < 2:
        raise ValueError("velocity needs at least 2 trajectory points")
    if px_per_degree is not None and px_per_degree <= 0:
        raise ValueError("px_per_degree must be positive")
    t = np.array([p.t_mid_us for p in pts], dtype=np.float64)
    x = np.array([p.cx for p in pts], dtype=np.float64)
    y = np.array([p.cy for p in pts], dtype=np.float64)

    vx = np.empty_like(x)
    vy = np.empty_like(y)
    vx[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])
    vy[1:-1] = (y[2:] - y[:-2]) / (t[2:] - t[:-2])
    vx[0] = (x[1] - x[0]) / (t[1] - t[0])
    vy[0] = (y[1] - y[0]) / (t[1] - t[0])
    vx[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    vy[-1] = (y[-1] - y[-2]) / (t[-1] - t[-2])

    speed_px_s = np.hypot(vx, vy) * 1e6  # per-microsecond slope -> per-second
    samples = []
    for i, p in enumerate(pts):
        deg = float(speed_px_s[i] / px_per_degree) if px_per_degree else None
        samples.append(VelocitySample(t_mid_us=p.t_mid_us, speed_px_s=float(speed_px_s[i]), speed_deg_s=deg))
    return samples


@dataclass(frozen=True)
class SaccadeInterval:
    onset_us: float
    offset_us: float
    peak_deg_s: float


def flag_saccade_candidates(
    velocities: Sequence[VelocitySample],
    threshold_deg_s: float = 300.0,
    min_duration_ms: float = 10.0,
) -> list[SaccadeInterval]:
    """Maximal runs with angular speed >= threshold lasting long enough.

    Requires calibrated samples (speed_deg_s present on every sample).
    """
    if any(v.speed_deg_s is None for v in velocities):
        raise ValueError("saccade flagging requires angular speeds (px_per_degree calibration)")
    intervals = []
    run: list[VelocitySample] = []
    for v in list(velocities) + [None]:
        if v is not None and v.speed_deg_s >= threshold_deg_s:
            run.append(v)
            continue
        if run:
            onset, offset = run[0].t_mid_us, run[-1].t_mid_us
            if (offset - onset) / 1000.0 >= min_duration_ms:
                intervals.append(
                    SaccadeInterval(
                        onset_us=onset,
                        offset_us=offset,
                        peak_deg_s=max(s.speed_deg_s for s in run),
                    )
                )
            run = []
    return intervals


def write_trajectory_csv(
    trajectory: Trajectory,
    samples: Sequence[VelocitySample],
    path: Union[str, os.PathLike],
) -> None:
    if len(samples) != len(trajectory.points):
        raise ValueError("velocity samples must align with trajectory points")
    calibrated = samples and samples[0].speed_deg_s is not None
    with open(path, "w", encoding="utf-8") as fh:
        header = "t_us,cx,cy,source,confidence,speed_px_s"
        fh.write(header + (",speed_deg_s\n" if calibrated else "\n"))
        for p, v in zip(trajectory.points, samples):
            row = (
                f"{p.t_mid_us:.1f},{p.cx:.6f},{p.cy:.6f},{p.source},"
                f"{p.confidence:.6f},{v.speed_px_s:.6f}"
            )
            fh.write(row + (f",{v.speed_deg_s:.6f}\n" if calibrated else "\n"))


def write_saccades_csv(
    intervals: Sequence[SaccadeInterval], path: Union[str, os.PathLike]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("onset_us,offset_us,peak_deg_s\n")
        for s in intervals:
            fh.write(f"{s.onset_us:.1f},{s.offset_us:.1f},{s.peak_deg_s:.6f}\n")
