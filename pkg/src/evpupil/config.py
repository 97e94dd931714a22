"""Pipeline configuration: one nested dataclass, JSON round-trippable."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

from .detect import CentroidConfig
from .events import DEFAULT_GEOMETRY, SensorGeometry
from .framegen import FrameGenConfig

__all__ = [
    "DatasetConfig",
    "MetricsConfig",
    "PipelineConfig",
    "TrackConfig",
    "load_config",
]


@dataclass(frozen=True)
class DatasetConfig:
    frames_per_eye: int = 20
    ratios: Tuple[float, float, float] = (0.70, 0.15, 0.15)
    truth_box_px: float = 6.0

    def __post_init__(self) -> None:
        if self.frames_per_eye < 1:
            raise ValueError("frames_per_eye must be at least 1")
        if self.truth_box_px <= 0:
            raise ValueError("truth_box_px must be positive")


@dataclass(frozen=True)
class MetricsConfig:
    iou_threshold: float = 0.5
    confidence_threshold: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 < self.iou_threshold <= 1.0):
            raise ValueError("iou_threshold must be in (0, 1]")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise ValueError("confidence_threshold must be in [0, 1]")


@dataclass(frozen=True)
class TrackConfig:
    max_gap_frames: int = 2
    px_per_degree: Optional[float] = None
    saccade_threshold_deg_s: float = 300.0
    saccade_min_duration_ms: float = 10.0

    def __post_init__(self) -> None:
        if self.max_gap_frames < 0:
            raise ValueError("max_gap_frames must be nonnegative")
        if self.px_per_degree is not None and self.px_per_degree <= 0:
            raise ValueError("px_per_degree must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    geometry: SensorGeometry = DEFAULT_GEOMETRY
    framegen: FrameGenConfig = field(default_factory=FrameGenConfig)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    detect: CentroidConfig = field(default_factory=CentroidConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    track: TrackConfig = field(default_factory=TrackConfig)
    seed: int = 0
    threads: Optional[int] = None

    def effective_threads(self) -> int:
        if self.threads is not None:
            if self.threads < 1:
                raise ValueError("threads must be at least 1")
            return self.threads
        return os.cpu_count() or 1

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["dataset"]["ratios"] = list(self.dataset.ratios)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        kwargs = dict(raw)
        if "geometry" in kwargs:
            kwargs["geometry"] = SensorGeometry(**kwargs["geometry"])
        if "framegen" in kwargs:
            kwargs["framegen"] = FrameGenConfig(**kwargs["framegen"])
        if "dataset" in kwargs:
            ds = dict(kwargs["dataset"])
            if "ratios" in ds:
                ds["ratios"] = tuple(ds["ratios"])
            kwargs["dataset"] = DatasetConfig(**ds)
        if "detect" in kwargs:
            kwargs["detect"] = CentroidConfig(**kwargs["detect"])
        if "metrics" in kwargs:
            kwargs["metrics"] = MetricsConfig(**kwargs["metrics"])
        if "track" in kwargs:
            kwargs["track"] = TrackConfig(**kwargs["track"])
        return cls(**kwargs)

    def save(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def replace(self, **kwargs) -> "PipelineConfig":
        return dataclasses.replace(self, **kwargs)


def load_config(path: Union[str, os.PathLike]) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))
