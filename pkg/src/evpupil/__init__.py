"""Event-camera pupil tracking toolkit.

Converts raw event streams into fixed-duration accumulated frames,
produces and consumes YOLO-format pupil annotations, scores detections
with IoU-based metrics, and assembles detections into trajectories for
downstream saccade analysis.
"""

from .config import DatasetConfig, MetricsConfig, PipelineConfig, TrackConfig, load_config
from .dataset import (
    Annotation,
    SampledFrame,
    SplitManifest,
    emit_dataset,
    read_yolo_label,
    sample_frames,
    split_by_subject,
    write_yolo_label,
)
from .detect import CentroidConfig, Detection, centroid_detect, load_detections, save_detections
from .events import (
    DEFAULT_GEOMETRY,
    Event,
    EventStream,
    ParseError,
    SensorGeometry,
    parse_events,
    write_binary,
    write_csv,
)
from .framegen import (
    Frame,
    FrameGenConfig,
    WindowPlan,
    accumulate,
    generate_frames,
    plan_windows,
    write_frames,
)
from .metrics import (
    EvalReport,
    GroundTruth,
    MatchResult,
    average_precision,
    evaluate,
    iou,
    match_detections,
    mean_average_precision,
    pr_curve,
    precision_recall_f1,
)
from .synth import GroundTruthTrack, linear_path, sine_path, step_path, still_path, synth_moving_disc
from .track import (
    SaccadeInterval,
    Trajectory,
    TrajectoryPoint,
    VelocitySample,
    build_trajectory,
    flag_saccade_candidates,
    interpolate_gaps,
    velocity,
)

__version__ = "0.1.0"
