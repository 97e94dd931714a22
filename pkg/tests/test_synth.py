import numpy as np
import pytest

from evpupil.events import SensorGeometry, events_to_csv_bytes
from evpupil.synth import (
    GroundTruthTrack,
    linear_path,
    sine_path,
    step_path,
    still_path,
    synth_moving_disc,
)

GEOM = SensorGeometry(346, 260)


def test_stationary_disc_count_and_span():
    stream, _ = synth_moving_disc(
        GEOM, still_path((173, 130)), radius=5.0, event_rate=300.0, duration_ms=25.0, seed=1
    )
    # the generator emits rate * duration events with timestamps inside the span
    assert len(stream) == 7500
    assert stream.t_max - stream.t_min <= 25_000
    assert stream.t_min >= 0


def test_same_seed_byte_identical():
    kwargs = dict(
        geometry=GEOM,
        path=linear_path((100, 100), (200, 100), 50.0),
        radius=3.0,
        event_rate=200.0,
        duration_ms=50.0,
    )
    a, _ = synth_moving_disc(seed=42, **kwargs)
    b, _ = synth_moving_disc(seed=42, **kwargs)
    assert events_to_csv_bytes(a) == events_to_csv_bytes(b)
    c, _ = synth_moving_disc(seed=43, **kwargs)
    assert events_to_csv_bytes(c) != events_to_csv_bytes(a)


def test_linear_path_ground_truth_midpoint():
    _, truth = synth_moving_disc(
        GEOM, linear_path((100, 100), (200, 100), 100.0), radius=3.0,
        event_rate=50.0, duration_ms=100.0, seed=0,
    )
    cx, cy = truth.center_at(50_000)
    assert cx == pytest.approx(150.0)
    assert cy == pytest.approx(100.0)


def test_path_leaving_bounds_rejected():
    with pytest.raises(ValueError, match="leaves sensor bounds"):
        synth_moving_disc(
            GEOM, linear_path((10, 10), (400, 10), 100.0), radius=3.0,
            event_rate=50.0, duration_ms=100.0, seed=0,
        )


def test_parameter_validation():
    path = still_path((100, 100))
    with pytest.raises(ValueError, match="radius"):
        synth_moving_disc(GEOM, path, radius=0, event_rate=10, duration_ms=10, seed=0)
    with pytest.raises(ValueError, match="duration"):
        synth_moving_disc(GEOM, path, radius=2, event_rate=10, duration_ms=0, seed=0)
    with pytest.raises(ValueError, match="event_rate"):
        synth_moving_disc(GEOM, path, radius=2, event_rate=0, duration_ms=10, seed=0)


def test_events_stay_near_disc_rim():
    radius = 4.0
    stream, truth = synth_moving_disc(
        GEOM, sine_path((173, 130), 40.0, 80.0), radius=radius,
        event_rate=100.0, duration_ms=160.0, seed=5,
    )
    cx, cy = truth.center_at(stream.t)
    dist = np.hypot(stream.x - cx, stream.y - cy)
    # rounding to the pixel grid moves a rim point by at most ~0.71 px
    assert np.all(dist <= radius + 0.75)
    assert np.all(dist >= radius - 0.75)


def test_polarity_split_follows_motion():
    # rightward motion: ON events lead (larger x than center), OFF trail
    stream, truth = synth_moving_disc(
        GEOM, linear_path((100, 130), (200, 130), 100.0), radius=4.0,
        event_rate=100.0, duration_ms=100.0, seed=9,
    )
    cx, _ = truth.center_at(stream.t)
    dx = stream.x - cx
    assert np.mean(dx[stream.p == 1]) > 1.0
    assert np.mean(dx[stream.p == -1]) < -1.0


def test_step_path_endpoints_and_rise():
    path = step_path((100, 100), (200, 100), step_at_ms=50.0, rise_ms=20.0)
    x0, _ = path(np.array([0.0, 39.9]))
    x1, _ = path(np.array([60.1, 100.0]))
    assert np.allclose(x0, 100.0)
    assert np.allclose(x1, 200.0)
    xm, _ = path(np.array([50.0]))
    assert xm[0] == pytest.approx(150.0)


def test_ground_truth_csv_roundtrip(tmp_path):
    _, truth = synth_moving_disc(
        GEOM, sine_path((173, 130), 20.0, 40.0), radius=3.0,
        event_rate=20.0, duration_ms=40.0, seed=2,
    )
    dest = tmp_path / "truth.csv"
    truth.write_csv(dest)
    again = GroundTruthTrack.read_csv(dest)
    assert np.array_equal(again.t_us, truth.t_us)
    assert np.allclose(again.cx, truth.cx, atol=1e-6)
    assert np.allclose(again.cy, truth.cy, atol=1e-6)
