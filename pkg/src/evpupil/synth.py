"""Synthetic moving-disc event generator with exact ground truth.

Events are deposited on the rim of a disc following a parametric path:
rim points on the leading half (relative to the instantaneous motion
direction) emit ON events, the trailing half emits OFF events, mimicking
how a bright disc sweeping over a dark background drives a change
detector. A stationary disc falls back to a fixed +x reference direction
so the output stays deterministic.

Paths are vectorized callables mapping time in milliseconds to center
coordinates in pixels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Tuple, Union

import numpy as np

from .events import EventStream, SensorGeometry

__all__ = [
    "GroundTruthTrack",
    "PathFn",
    "linear_path",
    "sine_path",
    "step_path",
    "still_path",
    "synth_moving_disc",
]

# t_ms (scalar or array) -> (cx, cy) in pixels
PathFn = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


def still_path(center: Tuple[float, float]) -> PathFn:
    cx, cy = float(center[0]), float(center[1])

    def path(t_ms):
        t = np.asarray(t_ms, dtype=np.float64)
        return np.full_like(t, cx), np.full_like(t, cy)

    return path


def linear_path(start: Tuple[float, float], end: Tuple[float, float], duration_ms: float) -> PathFn:
    """Constant-velocity segment from start to end over the full duration."""
    x0, y0 = float(start[0]), float(start[1])
    x1, y1 = float(end[0]), float(end[1])
    d = float(duration_ms)
    if d <= 0:
        raise ValueError("duration_ms must be positive")

    def path(t_ms):
        a = np.clip(np.asarray(t_ms, dtype=np.float64) / d, 0.0, 1.0)
        return x0 + (x1 - x0) * a, y0 + (y1 - y0) * a

    return path


def sine_path(
    center: Tuple[float, float],
    amplitude_px: float,
    period_ms: float,
    axis: str = "x",
) -> PathFn:
    """Sinusoidal oscillation about a center point along one axis."""
    if period_ms <= 0:
        raise ValueError("period_ms must be positive")
    if axis not in ("x", "y"):
        raise ValueError("axis must be 'x' or 'y'")
    cx, cy = float(center[0]), float(center[1])
    w = 2.0 * np.pi / float(period_ms)
    amp = float(amplitude_px)

    def path(t_ms):
        t = np.asarray(t_ms, dtype=np.float64)
        off = amp * np.sin(w * t)
        if axis == "x":
            return cx + off, np.full_like(t, cy)
        return np.full_like(t, cx), cy + off

    return path


def step_path(
    start: Tuple[float, float],
    end: Tuple[float, float],
    step_at_ms: float,
    rise_ms: float,
) -> PathFn:
    """Smoothstep jump from start to end, centered at step_at_ms.

    The transition takes rise_ms; outside it the center is stationary.
    Peak speed is 1.5 * distance / rise_ms (smoothstep derivative maximum).
    """
    if rise_ms <= 0:
        raise ValueError("rise_ms must be positive")
    x0, y0 = float(start[0]), float(start[1])
    x1, y1 = float(end[0]), float(end[1])
    t0 = float(step_at_ms) - float(rise_ms) / 2.0

    def path(t_ms):
        s = np.clip((np.asarray(t_ms, dtype=np.float64) - t0) / float(rise_ms), 0.0, 1.0)
        h = s * s * (3.0 - 2.0 * s)
        return x0 + (x1 - x0) * h, y0 + (y1 - y0) * h

    return path


@dataclass(frozen=True)
class GroundTruthTrack:
    """True disc center sampled once per millisecond (inclusive endpoints)."""

    t_us: np.ndarray
    cx: np.ndarray
    cy: np.ndarray

    def center_at(self, t_us) -> Tuple[np.ndarray, np.ndarray]:
        """Linearly interpolated center at arbitrary microsecond times."""
        t = np.asarray(t_us, dtype=np.float64)
        return np.interp(t, self.t_us, self.cx), np.interp(t, self.t_us, self.cy)

    def write_csv(self, dest: Union[str, os.PathLike]) -> None:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write("t_us,cx,cy\n")
            for t, x, y in zip(self.t_us, self.cx, self.cy):
                fh.write(f"{int(t)},{x:.6f},{y:.6f}\n")

    @classmethod
    def read_csv(cls, source: Union[str, os.PathLike]) -> "GroundTruthTrack":
        arr = np.loadtxt(source, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
        if arr.shape[1] != 3:
            raise ValueError("ground-truth CSV must have columns t_us,cx,cy")
        return cls(arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2])


def synth_moving_disc(
    geometry: SensorGeometry,
    path: PathFn,
    radius: float,
    event_rate: float,
    duration_ms: float,
    seed: int,
) -> Tuple[EventStream, GroundTruthTrack]:
    """Generate a disc-rim event stream plus its ground-truth track.

    Args:
        geometry: sensor bounds; the disc must stay fully inside.
        path: center trajectory over [0, duration_ms].
        radius: disc radius in pixels.
        event_rate: events per millisecond (total count is rate * duration).
        duration_ms: stream length; timestamps span [0, duration_ms * 1000).
        seed: RNG seed; identical parameters and seed give byte-identical
            streams.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if duration_ms <= 0:
        raise ValueError("duration_ms must be positive")
    if event_rate <= 0:
        raise ValueError("event_rate must be positive")

    _check_path_bounds(geometry, path, radius, duration_ms)

    n = int(round(event_rate * duration_ms))
    n = max(n, 1)
    rng = np.random.default_rng(seed)
    duration_us = int(round(duration_ms * 1000.0))

    t_us = np.sort(rng.integers(0, duration_us, size=n, dtype=np.int64), kind="stable")
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n)

    t_ms = t_us / 1000.0
    cx, cy = path(t_ms)

    # Instantaneous motion direction via central differences (0.5 ms step).
    h = 0.5
    fx, fy = path(np.clip(t_ms + h, 0.0, duration_ms))
    bx, by = path(np.clip(t_ms - h, 0.0, duration_ms))
    vx, vy = fx - bx, fy - by
    speed = np.hypot(vx, vy)
    still = speed < 1e-12
    vx = np.where(still, 1.0, vx)
    vy = np.where(still, 0.0, vy)

    nx, ny = np.cos(theta), np.sin(theta)
    p = np.where(nx * vx + ny * vy >= 0.0, 1, -1).astype(np.int8)

    x = np.rint(cx + radius * nx).astype(np.int64)
    y = np.rint(cy + radius * ny).astype(np.int64)

    stream = EventStream(geometry, t_us, x, y, p)

    ms_grid = np.arange(0.0, duration_ms + 0.5, 1.0)
    gx, gy = path(ms_grid)
    truth = GroundTruthTrack((ms_grid * 1000.0).astype(np.int64), gx, gy)
    return stream, truth


def _check_path_bounds(
    geometry: SensorGeometry, path: PathFn, radius: float, duration_ms: float
) -> None:
    grid = np.arange(0.0, duration_ms + 0.25, 0.25)
    cx, cy = path(grid)
    bad = (
        (cx - radius < 0)
        | (cx + radius > geometry.width - 1)
        | (cy - radius < 0)
        | (cy + radius > geometry.height - 1)
    )
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise ValueError(
            f"disc leaves sensor bounds at t={grid[i]:.2f} ms "
            f"(center=({cx[i]:.1f},{cy[i]:.1f}), radius={radius})"
        )
