import numpy as np
import pytest

from evpupil.events import EventStream, SensorGeometry
from evpupil.framegen import (
    Frame,
    FrameGenConfig,
    WindowPlan,
    accumulate,
    encode_frame_png,
    frame_filename,
    generate_frames,
    plan_windows,
    read_frame_image,
    read_sidecar,
    write_frames,
)
from evpupil.synth import linear_path, synth_moving_disc

GEOM = SensorGeometry(346, 260)
SMALL = SensorGeometry(32, 24)


def make_stream(rows, geometry=GEOM):
    t, x, y, p = (np.array(col) for col in zip(*rows))
    return EventStream(geometry, t, x, y, p)


def uniform_stream(n, t_span, seed=0, geometry=GEOM):
    rng = np.random.default_rng(seed)
    return EventStream(
        geometry,
        np.sort(rng.integers(0, t_span, n)),
        rng.integers(0, geometry.width, n),
        rng.integers(0, geometry.height, n),
        rng.choice([-1, 1], n),
    )


class TestPlanWindows:
    def test_ceiling_count_25ms(self):
        plans = plan_windows(0, 25_000, 10.0)
        assert [(p.t_start, p.t_end) for p in plans] == [
            (0, 10_000), (10_000, 20_000), (20_000, 30_000),
        ]
        assert [p.index for p in plans] == [0, 1, 2]

    def test_exact_division(self):
        assert len(plan_windows(0, 20_000, 10.0)) == 2

    def test_degenerate_single_timestamp(self):
        plans = plan_windows(5_000, 5_000, 10.0)
        assert len(plans) == 1
        assert (plans[0].t_start, plans[0].t_end) == (5_000, 15_000)

    def test_anchored_at_t_min(self):
        plans = plan_windows(7_331, 17_332, 10.0)
        assert plans[0].t_start == 7_331
        assert len(plans) == 2
        assert plans[-1].t_end == 27_331  # final window kept full-length

    def test_zero_duration_rejected(self):
        with pytest.raises(ValueError):
            plan_windows(0, 1_000, 0.0)

    def test_inverted_span_rejected(self):
        with pytest.raises(ValueError):
            plan_windows(10, 5, 10.0)

    def test_tiling_covers_every_event(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            t = np.sort(rng.integers(0, 100_000, 200))
            plans = plan_windows(int(t[0]), int(t[-1]), 7.0)
            membership = np.zeros(t.size, dtype=int)
            for p in plans:
                membership += (t >= p.t_start) & (t < p.t_end)
            assert np.all(membership == 1)
            for a, b in zip(plans, plans[1:]):
                assert a.t_end == b.t_start


class TestAccumulate:
    def test_gate_is_strict(self):
        cfg = FrameGenConfig(event_threshold=2000)
        window = WindowPlan(0, 0, 10_000)
        rng = np.random.default_rng(0)

        def stream_of(n):
            return make_stream(
                [(int(v), 5, 5, 1) for v in np.sort(rng.integers(0, 10_000, n))]
            )

        assert accumulate(stream_of(1_999), window, cfg) is None
        assert accumulate(stream_of(2_000), window, cfg) is None
        frame = accumulate(stream_of(2_001), window, cfg)
        assert frame is not None
        assert frame.event_count == 2_001

    def test_single_on_event_maps_row_col(self):
        cfg = FrameGenConfig(event_threshold=0)
        frame = accumulate(make_stream([(1, 3, 4, 1)]), WindowPlan(0, 0, 10_000), cfg)
        assert frame.pixels[4, 3] == 255
        expected = np.full((GEOM.height, GEOM.width), 128, dtype=np.uint8)
        expected[4, 3] = 255
        assert np.array_equal(frame.pixels, expected)

    def test_collision_last_write_wins(self):
        cfg = FrameGenConfig(event_threshold=0)
        frame = accumulate(
            make_stream([(1, 7, 8, 1), (2, 7, 8, -1)]), WindowPlan(0, 0, 10_000), cfg
        )
        assert frame.pixels[8, 7] == 0
        frame = accumulate(
            make_stream([(1, 7, 8, -1), (2, 7, 8, 1)]), WindowPlan(0, 0, 10_000), cfg
        )
        assert frame.pixels[8, 7] == 255

    def test_events_outside_window_rejected(self):
        cfg = FrameGenConfig(event_threshold=0)
        with pytest.raises(ValueError, match="outside window"):
            accumulate(make_stream([(12_000, 1, 1, 1)]), WindowPlan(0, 0, 10_000), cfg)

    def test_frame_pixels_readonly(self):
        cfg = FrameGenConfig(event_threshold=0)
        frame = accumulate(make_stream([(1, 1, 1, 1)]), WindowPlan(0, 0, 10_000), cfg)
        with pytest.raises(ValueError):
            frame.pixels[0, 0] = 7


class TestGenerateFrames:
    def test_dense_one_second_yields_100_frames(self):
        stream = uniform_stream(300_000, 1_000_000, seed=1)
        frames = generate_frames(stream, FrameGenConfig(event_threshold=2000))
        # oracle: count windows whose event totals clear the gate
        edges = np.arange(stream.t_min, stream.t_min + 101 * 10_000, 10_000)
        hist, _ = np.histogram(stream.t, bins=edges)
        assert len(frames) == int(np.sum(hist > 2000)) == 100

    def test_gate_gaps_keep_window_indices(self):
        rows = []
        rows += [(i, 1, 1, 1) for i in range(40)]              # window 0: 40 events
        rows += [(52_000 + i, 2, 2, 1) for i in range(45)]     # window 5: 45 events
        rows += [(31_000, 3, 3, 1)]                            # window 3: 1 event
        stream = make_stream(sorted(rows))
        frames = generate_frames(stream, FrameGenConfig(event_threshold=30))
        assert [f.index for f in frames] == [0, 5]

    def test_empty_stream_rejected(self):
        stream = EventStream(GEOM, [], [], [], [])
        with pytest.raises(ValueError, match="empty stream"):
            generate_frames(stream, FrameGenConfig())

    def test_pixel_alphabet(self):
        stream = uniform_stream(5_000, 50_000, seed=2, geometry=SMALL)
        frames = generate_frames(stream, FrameGenConfig(event_threshold=100))
        assert frames
        for f in frames:
            assert set(np.unique(f.pixels)) <= {0, 128, 255}

    def test_monotone_gate(self):
        stream = uniform_stream(20_000, 200_000, seed=3)
        counts = [
            len(generate_frames(stream, FrameGenConfig(event_threshold=thr)))
            for thr in (0, 500, 900, 1000, 1100, 5000)
        ]
        assert counts == sorted(counts, reverse=True)

    def test_reproducible_byte_identical(self):
        stream = uniform_stream(30_000, 100_000, seed=4)
        cfg = FrameGenConfig(event_threshold=1000)
        a = generate_frames(stream, cfg)
        b = generate_frames(stream, cfg)
        assert len(a) == len(b)
        for fa, fb in zip(a, b):
            assert encode_frame_png(fa) == encode_frame_png(fb)

    def test_threads_match_sequential(self):
        stream = uniform_stream(50_000, 300_000, seed=5)
        cfg = FrameGenConfig(event_threshold=500)
        seq = generate_frames(stream, cfg, threads=1)
        for threads in (2, 4):
            par = generate_frames(stream, cfg, threads=threads)
            assert [f.index for f in par] == [f.index for f in seq]
            for fa, fb in zip(par, seq):
                assert np.array_equal(fa.pixels, fb.pixels)

    def test_brute_force_equivalence_oracle(self):
        rng = np.random.default_rng(6)
        for trial in range(8):
            n = int(rng.integers(50, 5_000))
            span = int(rng.integers(5_000, 80_000))
            threshold = int(rng.integers(0, n // 3 + 1))
            stream = uniform_stream(n, span, seed=100 + trial, geometry=SMALL)
            cfg = FrameGenConfig(event_threshold=threshold, background_intensity=128)
            frames = generate_frames(stream, cfg)
            oracle = brute_force_frames(stream, cfg)
            assert [f.index for f in frames] == sorted(oracle)
            for f in frames:
                assert np.array_equal(f.pixels, oracle[f.index]), f"window {f.index}"


def brute_force_frames(stream, cfg):
    """Naive per-event rasterizer: the independent reference implementation."""
    dur = cfg.duration_us
    buckets = {}
    for e in stream:
        buckets.setdefault((e.t - stream.t_min) // dur, []).append(e)
    out = {}
    for idx, events in buckets.items():
        if len(events) <= cfg.event_threshold:
            continue
        img = np.full(
            (stream.geometry.height, stream.geometry.width),
            cfg.background_intensity,
            dtype=np.uint8,
        )
        for e in sorted(events, key=lambda e: e.t):
            img[e.y, e.x] = 255 if e.p > 0 else 0
        out[idx] = img
    return out


class TestFrameFiles:
    def test_write_frames_and_sidecar(self, tmp_path):
        stream, _ = synth_moving_disc(
            GEOM, linear_path((100, 100), (150, 100), 50.0),
            radius=3.0, event_rate=200.0, duration_ms=50.0, seed=7,
        )
        frames = generate_frames(stream, FrameGenConfig(event_threshold=100))
        names = write_frames(frames, tmp_path)
        assert names == [frame_filename(f.index) for f in frames]
        for f, name in zip(frames, names):
            assert np.array_equal(read_frame_image(tmp_path / name), f.pixels)
        plans = read_sidecar(tmp_path / "frames.csv")
        assert [(p.index, p.t_start, p.t_end) for p in plans] == [
            (f.index, f.window.t_start, f.window.t_end) for f in frames
        ]

    def test_frame_filename_format(self):
        assert frame_filename(12) == "frame_000012.png"

    def test_config_validation(self):
        with pytest.raises(ValueError):
            FrameGenConfig(duration_ms=0)
        with pytest.raises(ValueError):
            FrameGenConfig(event_threshold=-1)
        with pytest.raises(ValueError):
            FrameGenConfig(background_intensity=0)
        with pytest.raises(ValueError):
            FrameGenConfig(background_intensity=255)
        with pytest.raises(ValueError):
            FrameGenConfig(collision_rule="first_write_wins")
