"""YOLO-format dataset emission and annotation ingestion.

Splits are made at subject granularity: all frames from one subject land
in exactly one partition, so identity never leaks between train and
validation/test. Frames without a visible pupil get a present-but-empty
label file, keeping the image/label correspondence total.
"""

from __future__ import annotations

import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .events import EventStream, SensorGeometry
from .framegen import Frame, FrameGenConfig, encode_frame_png, generate_frames

__all__ = [
    "Annotation",
    "ManifestEntry",
    "SampledFrame",
    "SplitManifest",
    "emit_dataset",
    "read_yolo_label",
    "sample_frames",
    "split_by_subject",
    "write_yolo_label",
]

BOX_TOL = 1e-6
PARTITIONS = ("train", "val", "test")
EYES = ("left", "right")


@dataclass(frozen=True)
class Annotation:
    """One normalized ground-truth bounding box (YOLO convention)."""

    class_id: int
    cx: float
    cy: float
    w: float
    h: float
    frame_ref: str = ""

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise ValueError(f"class_id must be nonnegative, got {self.class_id}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise ValueError(f"center ({self.cx}, {self.cy}) outside unit square")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise ValueError(f"extent ({self.w}, {self.h}) outside (0, 1]")
        for lo, hi in ((self.cx - self.w / 2, self.cx + self.w / 2),
                       (self.cy - self.h / 2, self.cy + self.h / 2)):
            if lo < -BOX_TOL or hi > 1.0 + BOX_TOL:
                raise ValueError("box exceeds the unit square")

    @classmethod
    def from_pixel_box(
        cls,
        box: Tuple[float, float, float, float],
        geometry: SensorGeometry,
        class_id: int = 0,
        frame_ref: str = "",
    ) -> "Annotation":
        x_min, y_min, x_max, y_max = box
        return cls(
            class_id=class_id,
            cx=(x_min + x_max) / 2.0 / geometry.width,
            cy=(y_min + y_max) / 2.0 / geometry.height,
            w=(x_max - x_min) / geometry.width,
            h=(y_max - y_min) / geometry.height,
            frame_ref=frame_ref,
        )

    def to_pixel_box(self, geometry: SensorGeometry) -> Tuple[float, float, float, float]:
        return (
            (self.cx - self.w / 2.0) * geometry.width,
            (self.cy - self.h / 2.0) * geometry.height,
            (self.cx + self.w / 2.0) * geometry.width,
            (self.cy + self.h / 2.0) * geometry.height,
        )


def write_yolo_label(annotations: Sequence[Annotation]) -> str:
    """Render one image's annotations; empty input yields an empty string."""
    return "".join(
        f"{a.class_id} {a.cx:.6f} {a.cy:.6f} {a.w:.6f} {a.h:.6f}\n" for a in annotations
    )


def read_yolo_label(text: str, frame_ref: str = "") -> list[Annotation]:
    """Parse YOLO label text; malformed lines report their line number."""
    annotations = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"label line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            cx, cy, w, h = (float(v) for v in parts[1:])
        except ValueError as exc:
            raise ValueError(f"label line {lineno}: {exc}") from exc
        try:
            annotations.append(Annotation(class_id, cx, cy, w, h, frame_ref=frame_ref))
        except ValueError as exc:
            raise ValueError(f"label line {lineno}: {exc}") from exc
    return annotations


@dataclass(frozen=True)
class SampledFrame:
    """A sampled frame with its subject/eye provenance."""

    frame: Frame
    subject: str
    eye: str


def sample_frames(
    per_subject_streams: Mapping[Tuple[str, str], EventStream],
    n_per_eye: int,
    seed: int,
    config: Optional[FrameGenConfig] = None,
) -> list[SampledFrame]:
    """Uniformly sample emitted frames per subject per eye, no replacement.

    Keys are (subject_id, eye). If a stream emits fewer frames than
    requested, all of them are taken and a shortfall warning is recorded;
    a stream emitting zero frames is an error.
    """
    if n_per_eye < 1:
        raise ValueError("n_per_eye must be at least 1")
    if not per_subject_streams:
        raise ValueError("no streams supplied")
    config = config or FrameGenConfig()
    rng = np.random.default_rng(seed)
    sampled: list[SampledFrame] = []
    for subject, eye in sorted(per_subject_streams):
        stream = per_subject_streams[(subject, eye)]
        frames = generate_frames(stream, config)
        if not frames:
            raise ValueError(f"subject {subject!r} eye {eye!r} emitted zero frames")
        if len(frames) < n_per_eye:
            warnings.warn(
                f"subject {subject!r} eye {eye!r}: only {len(frames)} frames "
                f"available, requested {n_per_eye}",
                UserWarning,
                stacklevel=2,
            )
            chosen = np.arange(len(frames))
        else:
            chosen = np.sort(rng.choice(len(frames), size=n_per_eye, replace=False))
        sampled.extend(SampledFrame(frames[i], subject, eye) for i in chosen)
    return sampled


def _largest_remainder(ratios: Sequence[float], total: int) -> list[int]:
    exact = [r * total for r in ratios]
    counts = [int(np.floor(e)) for e in exact]
    remainders = [e - c for e, c in zip(exact, counts)]
    leftover = total - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    # Every nonzero-ratio partition must receive at least one subject.
    for i, r in enumerate(ratios):
        if r > 0 and counts[i] == 0:
            donor = max(range(len(counts)), key=lambda j: counts[j])
            counts[donor] -= 1
            counts[i] += 1
    return counts


def split_by_subject(
    subjects: Sequence[str], ratios: Sequence[float], seed: int
) -> dict[str, list[str]]:
    """Partition subjects into train/val/test by the given ratios.

    Deterministic for a fixed seed. No subject appears in two partitions.
    """
    if len(ratios) != 3:
        raise ValueError("ratios must be (train, val, test)")
    if any(r < 0 for r in ratios):
        raise ValueError("ratios must be nonnegative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    unique = sorted(set(subjects))
    if not unique:
        raise ValueError("no subjects supplied")
    nonzero = sum(1 for r in ratios if r > 0)
    if len(unique) < nonzero:
        raise ValueError(
            f"{len(unique)} subjects cannot fill {nonzero} nonzero partitions"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(unique))
    shuffled = [unique[i] for i in order]
    counts = _largest_remainder(ratios, len(unique))
    out: dict[str, list[str]] = {}
    pos = 0
    for name, count in zip(PARTITIONS, counts):
        out[name] = sorted(shuffled[pos:pos + count])
        pos += count
    return out


@dataclass(frozen=True)
class ManifestEntry:
    subject: str
    eye: str
    image: str
    label: str
    window_index: int
    t_start_us: int
    t_end_us: int
    event_count: int


@dataclass
class SplitManifest:
    """Per-partition provenance for every emitted image."""

    geometry: SensorGeometry
    seed: int
    n_per_eye: int
    ratios: Tuple[float, float, float]
    splits: dict[str, list[ManifestEntry]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def subjects(self, partition: str) -> set[str]:
        return {e.subject for e in self.splits.get(partition, [])}

    def check_disjoint(self) -> None:
        train = self.subjects("train")
        held_out = self.subjects("val") | self.subjects("test")
        overlap = train & held_out
        if overlap:
            raise ValueError(f"subjects appear in multiple partitions: {sorted(overlap)}")

    def to_dict(self) -> dict:
        return {
            "geometry": {"width": self.geometry.width, "height": self.geometry.height},
            "seed": self.seed,
            "n_per_eye": self.n_per_eye,
            "ratios": list(self.ratios),
            "splits": {
                name: [vars(e) for e in entries] for name, entries in self.splits.items()
            },
            "warnings": list(self.warnings),
        }

    def save(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "SplitManifest":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        manifest = cls(
            geometry=SensorGeometry(**raw["geometry"]),
            seed=raw["seed"],
            n_per_eye=raw["n_per_eye"],
            ratios=tuple(raw["ratios"]),
            splits={
                name: [ManifestEntry(**e) for e in entries]
                for name, entries in raw["splits"].items()
            },
            warnings=list(raw.get("warnings", [])),
        )
        return manifest


Annotator = Callable[[SampledFrame], Sequence[Annotation]]


def emit_dataset(
    per_subject_streams: Mapping[Tuple[str, str], EventStream],
    out_dir: Union[str, os.PathLike],
    n_per_eye: int,
    ratios: Sequence[float],
    seed: int,
    config: Optional[FrameGenConfig] = None,
    annotate: Optional[Annotator] = None,
) -> SplitManifest:
    """Write the images/{split}, labels/{split} layout plus manifest.json.

    ``annotate`` maps each sampled frame to its annotations; without it
    every label file is emitted empty (ready for manual labeling).
    """
    config = config or FrameGenConfig()
    geometry = next(iter(per_subject_streams.values())).geometry
    subjects = sorted({s for s, _ in per_subject_streams})
    assignment = split_by_subject(subjects, ratios, seed)
    partition_of = {s: part for part, subs in assignment.items() for s in subs}

    manifest = SplitManifest(
        geometry=geometry,
        seed=seed,
        n_per_eye=n_per_eye,
        ratios=(float(ratios[0]), float(ratios[1]), float(ratios[2])),
        splits={name: [] for name in PARTITIONS},
    )
    for name in PARTITIONS:
        os.makedirs(os.path.join(out_dir, "images", name), exist_ok=True)
        os.makedirs(os.path.join(out_dir, "labels", name), exist_ok=True)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sampled = sample_frames(per_subject_streams, n_per_eye, seed, config)
    for w in caught:
        manifest.warnings.append(str(w.message))
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)

    for item in sampled:
        part = partition_of[item.subject]
        stem = f"{item.subject}_{item.eye}_{item.frame.index:06d}"
        image_rel = os.path.join("images", part, stem + ".png")
        label_rel = os.path.join("labels", part, stem + ".txt")
        with open(os.path.join(out_dir, image_rel), "wb") as fh:
            fh.write(encode_frame_png(item.frame))
        boxes = list(annotate(item)) if annotate is not None else []
        with open(os.path.join(out_dir, label_rel), "w", encoding="utf-8") as fh:
            fh.write(write_yolo_label(boxes))
        manifest.splits[part].append(
            ManifestEntry(
                subject=item.subject,
                eye=item.eye,
                image=image_rel,
                label=label_rel,
                window_index=item.frame.index,
                t_start_us=item.frame.window.t_start,
                t_end_us=item.frame.window.t_end,
                event_count=item.frame.event_count,
            )
        )

    manifest.check_disjoint()
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest
