"""Accumulate event streams into fixed-duration 8-bit frames.

The stream span [t_min, t_max] is tiled with half-open windows of a fixed
duration anchored at t_min; the window count is the ceiling of span over
duration (the last window may extend past t_max and is kept full-length).
A window only yields a frame when its event count exceeds the configured
threshold. Within a frame, ON events paint 255, OFF events paint 0, onto a
mid-gray background; pixel collisions resolve last-write-wins in timestamp
order.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from PIL import Image

from .events import EventStream, SensorGeometry

__all__ = [
    "Frame",
    "FrameGenConfig",
    "WindowPlan",
    "accumulate",
    "frame_filename",
    "generate_frames",
    "plan_windows",
    "read_frame_image",
    "read_sidecar",
    "write_frames",
]

SIDECAR_NAME = "frames.csv"
SIDECAR_FIELDS = ("index", "t_start_us", "t_end_us", "event_count")


@dataclass(frozen=True)
class WindowPlan:
    """One accumulation window [t_start, t_end), with its frame ordinal."""

    index: int
    t_start: int
    t_end: int

    @property
    def t_mid(self) -> float:
        return (self.t_start + self.t_end) / 2.0


@dataclass(frozen=True)
class FrameGenConfig:
    duration_ms: float = 10.0
    event_threshold: int = 2000
    background_intensity: int = 128
    collision_rule: str = "last_write_wins"

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if self.event_threshold < 0:
            raise ValueError("event_threshold must be nonnegative")
        # 0 and 255 are reserved for OFF/ON pixels.
        if not (1 <= self.background_intensity <= 254):
            raise ValueError("background_intensity must be in [1, 254]")
        if self.collision_rule != "last_write_wins":
            raise ValueError(f"unknown collision rule {self.collision_rule!r}")

    @property
    def duration_us(self) -> int:
        d = int(round(self.duration_ms * 1000.0))
        if d < 1:
            raise ValueError("duration_ms must be at least 1 microsecond")
        return d


class Frame:
    """One accumulated frame; pixel array is read-only."""

    __slots__ = ("pixels", "window", "event_count", "geometry")

    def __init__(
        self,
        pixels: np.ndarray,
        window: WindowPlan,
        event_count: int,
        geometry: SensorGeometry,
    ) -> None:
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        if pixels.shape != (geometry.height, geometry.width):
            raise ValueError(
                f"pixel array shape {pixels.shape} does not match geometry {geometry}"
            )
        pixels.flags.writeable = False
        self.pixels = pixels
        self.window = window
        self.event_count = int(event_count)
        self.geometry = geometry

    @property
    def index(self) -> int:
        return self.window.index


def plan_windows(t_min: int, t_max: int, duration_ms: float) -> list[WindowPlan]:
    """Tile [t_min, t_max] with fixed-duration windows anchored at t_min.

    Returns ceil((t_max - t_min) / duration) windows, and a single window
    for a degenerate single-timestamp span.
    """
    if duration_ms <= 0:
        raise ValueError("duration_ms must be positive")
    if t_max < t_min:
        raise ValueError(f"t_max {t_max} < t_min {t_min}")
    dur = FrameGenConfig(duration_ms=duration_ms, event_threshold=0).duration_us
    span = int(t_max) - int(t_min)
    count = max(1, -(-span // dur))
    return [
        WindowPlan(index=i, t_start=int(t_min) + i * dur, t_end=int(t_min) + (i + 1) * dur)
        for i in range(count)
    ]


def _rasterize(
    x: np.ndarray, y: np.ndarray, p: np.ndarray, geometry: SensorGeometry, background: int
) -> np.ndarray:
    img = np.full((geometry.height, geometry.width), background, dtype=np.uint8)
    values = np.where(p > 0, 255, 0).astype(np.uint8)
    # Events arrive time-sorted; duplicate-index fancy assignment keeps the
    # last write, which is exactly the collision rule.
    img[y.astype(np.intp), x.astype(np.intp)] = values
    return img


def accumulate(
    events: EventStream, window: WindowPlan, config: FrameGenConfig
) -> Optional[Frame]:
    """Rasterize one window's events; returns None below the event gate."""
    if len(events):
        if events.t_min < window.t_start or events.t_max >= window.t_end:
            raise ValueError(
                f"events [{events.t_min}, {events.t_max}] fall outside window "
                f"[{window.t_start}, {window.t_end})"
            )
    if len(events) <= config.event_threshold:
        return None
    img = _rasterize(events.x, events.y, events.p, events.geometry, config.background_intensity)
    return Frame(img, window, len(events), events.geometry)


def generate_frames(
    stream: EventStream, config: FrameGenConfig, threads: int = 1
) -> list[Frame]:
    """Accumulate a whole stream into frames, in window order.

    Frame indices equal their window ordinals, with gaps where the event
    gate suppressed a window. Windows are independent, so accumulation may
    run on a thread pool; output is identical for any thread count.
    """
    if len(stream) == 0:
        raise ValueError("empty stream")
    dur = config.duration_us
    t_min = stream.t_min
    ids = (stream.t - t_min) // dur
    uids, starts, counts = np.unique(ids, return_index=True, return_counts=True)
    keep = counts > config.event_threshold
    jobs = [
        (int(uid), int(lo), int(cnt))
        for uid, lo, cnt in zip(uids[keep], starts[keep], counts[keep])
    ]

    def build(job: tuple[int, int, int]) -> Frame:
        uid, lo, cnt = job
        window = WindowPlan(index=uid, t_start=t_min + uid * dur, t_end=t_min + (uid + 1) * dur)
        chunk = stream.slice_range(lo, lo + cnt)
        img = _rasterize(chunk.x, chunk.y, chunk.p, stream.geometry, config.background_intensity)
        return Frame(img, window, cnt, stream.geometry)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(build, jobs))
    return [build(job) for job in jobs]


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.png"


def encode_frame_png(frame: Frame) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def write_frames(
    frames: Sequence[Frame],
    out_dir: Union[str, os.PathLike],
    threads: int = 1,
    sidecar: bool = True,
) -> list[str]:
    """Write frames as grayscale PNGs plus the window-metadata sidecar CSV."""
    os.makedirs(out_dir, exist_ok=True)
    names = [frame_filename(f.index) for f in frames]

    def emit(args: tuple[Frame, str]) -> None:
        frame, name = args
        with open(os.path.join(out_dir, name), "wb") as fh:
            fh.write(encode_frame_png(frame))

    if threads > 1 and len(frames) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(emit, zip(frames, names)))
    else:
        for item in zip(frames, names):
            emit(item)

    if sidecar:
        with open(os.path.join(out_dir, SIDECAR_NAME), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SIDECAR_FIELDS)
            for f in frames:
                writer.writerow([f.index, f.window.t_start, f.window.t_end, f.event_count])
    return names


def read_frame_image(path: Union[str, os.PathLike]) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def read_sidecar(path: Union[str, os.PathLike]) -> list[WindowPlan]:
    """Load the sidecar CSV back into window plans (frame order)."""
    plans = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(SIDECAR_FIELDS[:3]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"sidecar {path} missing columns: {sorted(missing)}")
        for row in reader:
            plans.append(
                WindowPlan(
                    index=int(row["index"]),
                    t_start=int(row["t_start_us"]),
                    t_end=int(row["t_end_us"]),
                )
            )
    return plans
