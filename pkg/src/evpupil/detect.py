"""Pupil detections: centroid baseline and detections-JSON interchange.

The centroid baseline picks whichever polarity (ON pixels at 255 vs OFF
pixels at 0) covers more pixels and takes that set's center of gravity.
The baseline only yields a point, so the bounding box is a convention:
center +/- box_sigma standard deviations of the pixel cluster per axis
(2 sigma covers roughly 95% of a compact cluster), clipped to the sensor.
Neural detectors are consumed through the JSON interchange instead of
being run here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .events import SensorGeometry
from .framegen import Frame

__all__ = [
    "CentroidConfig",
    "Detection",
    "centroid_detect",
    "load_detections",
    "save_detections",
]

Box = tuple[float, float, float, float]


@dataclass(frozen=True)
class Detection:
    """One predicted box with its confidence score."""

    frame_ref: str
    class_id: int
    box: Box
    confidence: float

    def __post_init__(self) -> None:
        x_min, y_min, x_max, y_max = self.box
        if not (x_min < x_max and y_min < y_max):
            raise ValueError(f"degenerate box {self.box}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.class_id < 0:
            raise ValueError(f"class_id must be nonnegative, got {self.class_id}")

    def center(self) -> tuple[float, float]:
        x_min, y_min, x_max, y_max = self.box
        return (x_min + x_max) / 2.0, (y_min + y_max) / 2.0

    def check_bounds(self, geometry: SensorGeometry) -> None:
        x_min, y_min, x_max, y_max = self.box
        if x_min < 0 or y_min < 0 or x_max > geometry.width or y_max > geometry.height:
            raise ValueError(f"box {self.box} exceeds sensor bounds {geometry}")


@dataclass(frozen=True)
class CentroidConfig:
    min_events: int = 1
    box_sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.min_events < 0:
            raise ValueError("min_events must be nonnegative")
        if self.box_sigma <= 0:
            raise ValueError("box_sigma must be positive")


def centroid_detect(
    frame: Union[Frame, np.ndarray],
    config: CentroidConfig = CentroidConfig(),
    frame_ref: str = "",
    geometry: Optional[SensorGeometry] = None,
) -> Optional[Detection]:
    """Dominant-polarity center-of-gravity detection on one frame.

    Returns None when fewer than min_events non-background pixels are set.
    Confidence is the dominant polarity's share of non-background pixels.
    Ties between polarity counts break toward ON.
    """
    if isinstance(frame, Frame):
        pixels = frame.pixels
        geometry = frame.geometry
        frame_ref = frame_ref or f"frame_{frame.index:06d}.png"
    else:
        pixels = np.asarray(frame)
        if geometry is None:
            geometry = SensorGeometry(width=pixels.shape[1], height=pixels.shape[0])

    on_y, on_x = np.nonzero(pixels == 255)
    off_y, off_x = np.nonzero(pixels == 0)
    total = on_x.size + off_x.size
    if total < max(config.min_events, 1):
        return None

    if on_x.size >= off_x.size:
        xs, ys, dominant = on_x, on_y, on_x.size
    else:
        xs, ys, dominant = off_x, off_y, off_x.size

    cx = float(xs.mean())
    cy = float(ys.mean())
    half_x = max(config.box_sigma * float(xs.std()), 0.5)
    half_y = max(config.box_sigma * float(ys.std()), 0.5)
    box = (
        max(cx - half_x, 0.0),
        max(cy - half_y, 0.0),
        min(cx + half_x, float(geometry.width)),
        min(cy + half_y, float(geometry.height)),
    )
    return Detection(
        frame_ref=frame_ref,
        class_id=0,
        box=box,
        confidence=dominant / total,
    )


def _coerce_record(record: object, index: int, geometry: Optional[SensorGeometry]) -> Detection:
    if not isinstance(record, dict):
        raise ValueError(f"record {index}: expected an object, got {type(record).__name__}")
    missing = {"frame", "class", "box", "conf"} - set(record)
    if missing:
        raise ValueError(f"record {index}: missing keys {sorted(missing)}")
    box = record["box"]
    if not (isinstance(box, (list, tuple)) and len(box) == 4):
        raise ValueError(f"record {index}: box must be [x_min, y_min, x_max, y_max]")
    try:
        det = Detection(
            frame_ref=str(record["frame"]),
            class_id=int(record["class"]),
            box=tuple(float(v) for v in box),
            confidence=float(record["conf"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"record {index}: {exc}") from exc
    if geometry is not None:
        try:
            det.check_bounds(geometry)
        except ValueError as exc:
            raise ValueError(f"record {index}: {exc}") from exc
    return det


def load_detections(
    source: Union[str, os.PathLike], geometry: Optional[SensorGeometry] = None
) -> dict[str, list[Detection]]:
    """Load and validate a detections-JSON file, grouped by frame reference."""
    with open(source, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise ValueError("detections JSON must be a top-level array")
    grouped: dict[str, list[Detection]] = {}
    for i, record in enumerate(raw):
        det = _coerce_record(record, i, geometry)
        grouped.setdefault(det.frame_ref, []).append(det)
    return grouped


def save_detections(
    detections: Union[Sequence[Detection], Mapping[str, Sequence[Detection]]],
    dest: Union[str, os.PathLike],
) -> None:
    if isinstance(detections, Mapping):
        flat = [d for dets in detections.values() for d in dets]
    else:
        flat = list(detections)
    payload = [
        {
            "frame": d.frame_ref,
            "class": d.class_id,
            "box": [float(v) for v in d.box],
            "conf": float(d.confidence),
        }
        for d in flat
    ]
    with open(dest, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
