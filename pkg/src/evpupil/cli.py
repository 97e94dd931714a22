"""Command-line entry point wiring the pipeline stages together.

Subcommands: synth, convert, dataset, detect, eval, track. Global flags
(--config, --seed, --threads, --geometry) come before the subcommand;
explicit flags override values from the config file. All randomness flows
through the single --seed flag, so equal seeds reproduce byte-identical
outputs at any thread count.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import Optional, Sequence

from . import dataset as ds
from . import detect as dt
from . import framegen as fg
from . import metrics as mt
from . import synth as sy
from . import track as tr
from .config import PipelineConfig, load_config
from .events import ParseError, SensorGeometry, parse_events, write_binary, write_csv

EVENT_FILE_EXTENSIONS = {".csv": "csv", ".bin": "binary_le"}


def _xy(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected X,Y, got {text!r}")
    return float(parts[0]), float(parts[1])


def _ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected TRAIN,VAL,TEST, got {text!r}")
    return tuple(float(p) for p in parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evpupil",
        description="Event-camera pupil tracking pipeline: frames, datasets, metrics, trajectories.",
    )
    parser.add_argument("--config", help="JSON pipeline config; flags override it")
    parser.add_argument("--seed", type=int, default=None, help="seed for all randomness")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    parser.add_argument("--geometry", type=SensorGeometry.parse, default=None, metavar="WxH",
                        help="sensor size, e.g. 346x260")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic disc stream with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", default="events", help="basename for the emitted files")
    p.add_argument("--format", choices=["csv", "binary_le"], default="csv")
    p.add_argument("--path", choices=["still", "linear", "sine", "step"], default="linear")
    p.add_argument("--center", type=_xy, default=(173.0, 130.0), help="still/sine center")
    p.add_argument("--start", type=_xy, default=(100.0, 130.0), help="linear/step start")
    p.add_argument("--end", type=_xy, default=(240.0, 130.0), help="linear/step end")
    p.add_argument("--amplitude", type=float, default=50.0, help="sine amplitude [px]")
    p.add_argument("--period-ms", type=float, default=120.0, help="sine period")
    p.add_argument("--axis", choices=["x", "y"], default="x", help="sine axis")
    p.add_argument("--step-at-ms", type=float, default=None, help="step midpoint (default: mid-stream)")
    p.add_argument("--rise-ms", type=float, default=30.0, help="step transition time")
    p.add_argument("--radius", type=float, default=2.0, help="disc radius [px]")
    p.add_argument("--rate", type=float, default=300.0, help="events per millisecond")
    p.add_argument("--duration-ms", type=float, default=1000.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="accumulate an event file into PNG frames")
    p.add_argument("--events", required=True, help="event file (csv or binary_le)")
    p.add_argument("--format", choices=["csv", "binary_le"], default=None,
                   help="input format (default: by file extension)")
    p.add_argument("--out", required=True, help="output frame directory")
    p.add_argument("--swap-xy", action="store_true",
                   help="treat the coordinate columns as t,y,x,p")
    p.add_argument("--window-ms", type=float, default=None, help="accumulation window")
    p.add_argument("--threshold", type=int, default=None, help="event-count gate")
    p.add_argument("--background", type=int, default=None, help="background intensity")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("dataset", help="emit a YOLO dataset from per-subject event files")
    p.add_argument("--events-dir", required=True,
                   help="directory of {subject}_{left|right}.csv/.bin files")
    p.add_argument("--out", required=True)
    p.add_argument("--frames-per-eye", type=int, default=None)
    p.add_argument("--ratios", type=_ratios, default=None, metavar="TRAIN,VAL,TEST")
    p.add_argument("--truth-box-px", type=float, default=None,
                   help="half-size of auto boxes from *.truth.csv files")
    p.add_argument("--window-ms", type=float, default=None)
    p.add_argument("--threshold", type=int, default=None)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("detect", help="detect pupils on frames or ingest external detections")
    p.add_argument("--frames", help="frame directory from `convert`")
    p.add_argument("--baseline", choices=["centroid"], default=None)
    p.add_argument("--from-json", dest="from_json", help="validate and re-emit external detections")
    p.add_argument("--out", required=True, help="detections JSON path")
    p.add_argument("--min-events", type=int, default=None)
    p.add_argument("--box-sigma", type=float, default=None)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="score detections against YOLO labels")
    p.add_argument("--detections", required=True)
    p.add_argument("--labels", required=True, help="label directory (one .txt per frame)")
    p.add_argument("--out", required=True, help="output directory for report + PR curve")
    p.add_argument("--iou-thr", type=float, default=None)
    p.add_argument("--conf-thr", type=float, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("track", help="assemble detections into a trajectory with velocities")
    p.add_argument("--detections", required=True)
    p.add_argument("--sidecar", required=True, help="frames.csv written by `convert`")
    p.add_argument("--out", required=True)
    p.add_argument("--max-gap", type=int, default=None)
    p.add_argument("--px-per-degree", type=float, default=None)
    p.add_argument("--saccade-threshold", type=float, default=None, help="deg/s")
    p.add_argument("--min-duration-ms", type=float, default=None)
    p.set_defaults(func=cmd_track)

    return parser


def _merge_config(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    if args.geometry is not None:
        config = config.replace(geometry=args.geometry)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.threads is not None:
        config = config.replace(threads=args.threads)

    def override(section, **updates):
        real = {k: v for k, v in updates.items() if v is not None}
        return dataclasses.replace(section, **real) if real else section

    fg_cfg = override(
        config.framegen,
        duration_ms=getattr(args, "window_ms", None),
        event_threshold=getattr(args, "threshold", None),
        background_intensity=getattr(args, "background", None),
    )
    ds_cfg = override(
        config.dataset,
        frames_per_eye=getattr(args, "frames_per_eye", None),
        ratios=getattr(args, "ratios", None),
        truth_box_px=getattr(args, "truth_box_px", None),
    )
    dt_cfg = override(
        config.detect,
        min_events=getattr(args, "min_events", None),
        box_sigma=getattr(args, "box_sigma", None),
    )
    mt_cfg = override(
        config.metrics,
        iou_threshold=getattr(args, "iou_thr", None),
        confidence_threshold=getattr(args, "conf_thr", None),
    )
    tr_cfg = override(
        config.track,
        max_gap_frames=getattr(args, "max_gap", None),
        px_per_degree=getattr(args, "px_per_degree", None),
        saccade_threshold_deg_s=getattr(args, "saccade_threshold", None),
        saccade_min_duration_ms=getattr(args, "min_duration_ms", None),
    )
    return config.replace(framegen=fg_cfg, dataset=ds_cfg, detect=dt_cfg, metrics=mt_cfg, track=tr_cfg)


def _build_path(args: argparse.Namespace, duration_ms: float) -> sy.PathFn:
    if args.path == "still":
        return sy.still_path(args.center)
    if args.path == "linear":
        return sy.linear_path(args.start, args.end, duration_ms)
    if args.path == "sine":
        return sy.sine_path(args.center, args.amplitude, args.period_ms, axis=args.axis)
    step_at = args.step_at_ms if args.step_at_ms is not None else duration_ms / 2.0
    return sy.step_path(args.start, args.end, step_at, args.rise_ms)


def cmd_synth(args: argparse.Namespace, config: PipelineConfig) -> int:
    path = _build_path(args, args.duration_ms)
    stream, truth = sy.synth_moving_disc(
        geometry=config.geometry,
        path=path,
        radius=args.radius,
        event_rate=args.rate,
        duration_ms=args.duration_ms,
        seed=config.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    ext = ".csv" if args.format == "csv" else ".bin"
    events_path = os.path.join(args.out, args.name + ext)
    if args.format == "csv":
        write_csv(stream, events_path, header=True)
    else:
        write_binary(stream, events_path)
    truth.write_csv(os.path.join(args.out, args.name + ".truth.csv"))
    print(f"wrote {len(stream)} events to {events_path}")
    return 0


def _detect_format(path: str, explicit: Optional[str]) -> str:
    if explicit:
        return explicit
    ext = os.path.splitext(path)[1].lower()
    if ext in EVENT_FILE_EXTENSIONS:
        return EVENT_FILE_EXTENSIONS[ext]
    return "csv"


def cmd_convert(args: argparse.Namespace, config: PipelineConfig) -> int:
    fmt = _detect_format(args.events, args.format)
    stream = parse_events(args.events, fmt=fmt, geometry=config.geometry, swap_xy=args.swap_xy)
    frames = fg.generate_frames(stream, config.framegen, threads=config.effective_threads())
    os.makedirs(args.out, exist_ok=True)
    fg.write_frames(frames, args.out, threads=config.effective_threads())
    if not frames:
        print(
            f"warning: event threshold {config.framegen.event_threshold} "
            "suppressed every window; no frames emitted",
            file=sys.stderr,
        )
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def _discover_event_files(events_dir: str) -> dict[tuple[str, str], tuple[str, str]]:
    """Map (subject, eye) -> (events_path, fmt) from directory naming."""
    found = {}
    for name in sorted(os.listdir(events_dir)):
        stem, ext = os.path.splitext(name)
        if ext.lower() not in EVENT_FILE_EXTENSIONS or stem.endswith(".truth"):
            continue
        for eye in ds.EYES:
            suffix = f"_{eye}"
            if stem.endswith(suffix) and len(stem) > len(suffix):
                subject = stem[: -len(suffix)]
                found[(subject, eye)] = (
                    os.path.join(events_dir, name),
                    EVENT_FILE_EXTENSIONS[ext.lower()],
                )
    if not found:
        raise ValueError(
            f"no event files matching '{{subject}}_{{left|right}}.csv/.bin' in {events_dir}"
        )
    return found


def cmd_dataset(args: argparse.Namespace, config: PipelineConfig) -> int:
    files = _discover_event_files(args.events_dir)
    streams = {
        key: parse_events(path, fmt=fmt, geometry=config.geometry)
        for key, (path, fmt) in files.items()
    }
    truths = {}
    for key, (path, _) in files.items():
        truth_path = os.path.splitext(path)[0] + ".truth.csv"
        if os.path.exists(truth_path):
            truths[key] = sy.GroundTruthTrack.read_csv(truth_path)

    annotate = None
    if truths:
        half = config.dataset.truth_box_px
        geometry = config.geometry

        def annotate(item: ds.SampledFrame):
            truth = truths.get((item.subject, item.eye))
            if truth is None:
                return []
            cx, cy = truth.center_at(item.frame.window.t_mid)
            box = (
                max(float(cx) - half, 0.0),
                max(float(cy) - half, 0.0),
                min(float(cx) + half, float(geometry.width)),
                min(float(cy) + half, float(geometry.height)),
            )
            return [ds.Annotation.from_pixel_box(box, geometry)]

    manifest = ds.emit_dataset(
        streams,
        args.out,
        n_per_eye=config.dataset.frames_per_eye,
        ratios=config.dataset.ratios,
        seed=config.seed,
        config=config.framegen,
        annotate=annotate,
    )
    counts = {name: len(entries) for name, entries in manifest.splits.items()}
    print(f"wrote dataset to {args.out}: {counts}")
    return 0


def cmd_detect(args: argparse.Namespace, config: PipelineConfig) -> int:
    if bool(args.from_json) == bool(args.baseline):
        raise ValueError("choose exactly one of --baseline centroid or --from-json FILE")
    if args.from_json:
        grouped = dt.load_detections(args.from_json, geometry=config.geometry)
        flat = [d for dets in grouped.values() for d in dets]
    else:
        if not args.frames:
            raise ValueError("--baseline centroid requires --frames DIR")
        names = sorted(n for n in os.listdir(args.frames) if n.lower().endswith(".png"))
        if not names:
            raise ValueError(f"no PNG frames found in {args.frames}")
        flat = []
        for name in names:
            pixels = fg.read_frame_image(os.path.join(args.frames, name))
            det = dt.centroid_detect(pixels, config.detect, frame_ref=name)
            if det is not None:
                flat.append(det)
    dt.save_detections(flat, args.out)
    print(f"wrote {len(flat)} detections to {args.out}")
    return 0


def _load_ground_truths(labels_dir: str, geometry: SensorGeometry) -> list[mt.GroundTruth]:
    truths = []
    names = sorted(n for n in os.listdir(labels_dir) if n.endswith(".txt"))
    if not names:
        raise ValueError(f"no label files found in {labels_dir}")
    for name in names:
        frame_ref = os.path.splitext(name)[0] + ".png"
        with open(os.path.join(labels_dir, name), "r", encoding="utf-8") as fh:
            annotations = ds.read_yolo_label(fh.read(), frame_ref=frame_ref)
        for a in annotations:
            truths.append(
                mt.GroundTruth(frame_ref=frame_ref, box=a.to_pixel_box(geometry), class_id=a.class_id)
            )
    return truths


def run_eval(
    detections_path: str,
    labels_dir: str,
    out_dir: str,
    config: PipelineConfig,
) -> mt.EvalReport:
    """Library-level implementation of `eval`; the CLI is a thin wrapper."""
    from . import report as rp

    grouped = dt.load_detections(detections_path, geometry=config.geometry)
    label_names = {os.path.splitext(n)[0] + ".png"
                   for n in os.listdir(labels_dir) if n.endswith(".txt")}
    unknown = sorted(set(grouped) - label_names)
    if unknown:
        raise ValueError(f"frame-reference mismatch: detections reference unlabeled frames {unknown[:5]}")
    truths = _load_ground_truths(labels_dir, config.geometry)
    flat = [d for dets in grouped.values() for d in dets]

    report = mt.evaluate(
        flat,
        truths,
        iou_thr=config.metrics.iou_threshold,
        conf_thr=config.metrics.confidence_threshold,
    )
    points = mt.pr_curve(flat, truths, iou_thr=config.metrics.iou_threshold)
    os.makedirs(out_dir, exist_ok=True)
    report.save(os.path.join(out_dir, "report.json"))
    mt.write_pr_csv(points, os.path.join(out_dir, "pr_curve.csv"))
    rp.render_pr_curve(points, os.path.join(out_dir, "pr_curve.png"), ap=report.map)
    return report


def cmd_eval(args: argparse.Namespace, config: PipelineConfig) -> int:
    report = run_eval(args.detections, args.labels, args.out, config)
    print(
        f"map={report.map:.4f} precision={report.precision:.4f} "
        f"recall={report.recall:.4f} f1={report.f1:.4f} "
        f"(tp={report.tp} fp={report.fp} fn={report.fn})"
    )
    return 0


def run_track(
    detections_path: str,
    sidecar_path: str,
    out_dir: str,
    config: PipelineConfig,
) -> tuple[tr.Trajectory, list[tr.VelocitySample], list[tr.SaccadeInterval]]:
    """Library-level implementation of `track`; the CLI is a thin wrapper."""
    from . import report as rp

    grouped = dt.load_detections(detections_path, geometry=config.geometry)
    plans = fg.read_sidecar(sidecar_path)
    trajectory = tr.build_trajectory(tr.detections_by_frame_index(grouped), plans)
    trajectory = tr.interpolate_gaps(trajectory, config.track.max_gap_frames)
    samples = tr.velocity(trajectory, px_per_degree=config.track.px_per_degree)
    saccades: list[tr.SaccadeInterval] = []
    if config.track.px_per_degree is not None:
        saccades = tr.flag_saccade_candidates(
            samples,
            threshold_deg_s=config.track.saccade_threshold_deg_s,
            min_duration_ms=config.track.saccade_min_duration_ms,
        )
    os.makedirs(out_dir, exist_ok=True)
    tr.write_trajectory_csv(trajectory, samples, os.path.join(out_dir, "trajectory.csv"))
    if config.track.px_per_degree is not None:
        tr.write_saccades_csv(saccades, os.path.join(out_dir, "saccades.csv"))
    rp.render_trajectory(
        trajectory,
        samples,
        os.path.join(out_dir, "trajectory.png"),
        saccades=saccades,
        threshold_deg_s=config.track.saccade_threshold_deg_s if config.track.px_per_degree else None,
    )
    return trajectory, samples, saccades


def cmd_track(args: argparse.Namespace, config: PipelineConfig) -> int:
    trajectory, _, saccades = run_track(args.detections, args.sidecar, args.out, config)
    msg = f"wrote trajectory with {len(trajectory)} points to {args.out}"
    if config.track.px_per_degree is not None:
        msg += f" ({len(saccades)} saccade candidates)"
    print(msg)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _merge_config(args)
        return args.func(args, config)
    except (ParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
