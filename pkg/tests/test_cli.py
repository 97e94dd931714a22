import hashlib
import json
import os
from pathlib import Path

import pytest

from evpupil.cli import main, run_eval
from evpupil.config import PipelineConfig, load_config
from evpupil.detect import Detection, save_detections
from evpupil.events import SensorGeometry


def tree_digest(root):
    """Stable content hash of a directory tree (relative paths + bytes)."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def synth_run(tmp_path_factory):
    """One second of dense sinusoidal disc motion, converted to frames."""
    root = tmp_path_factory.mktemp("synthrun")
    events = root / "events"
    frames = root / "frames"
    assert run_cli(
        "--seed", 7, "synth", "--out", events, "--path", "sine",
        "--center", "173,130", "--amplitude", "55", "--period-ms", "110",
        "--radius", "2.0", "--rate", "300", "--duration-ms", "1000",
    ) == 0
    assert run_cli("convert", "--events", events / "events.csv", "--out", frames) == 0
    return root


class TestSynthConvert:
    def test_dense_second_yields_100_frames_and_sidecar(self, synth_run):
        frames = synth_run / "frames"
        pngs = sorted(p.name for p in frames.glob("*.png"))
        assert len(pngs) == 100
        sidecar = (frames / "frames.csv").read_text().splitlines()
        assert sidecar[0] == "index,t_start_us,t_end_us,event_count"
        assert len(sidecar) == 101

    def test_empty_events_file_fails(self, tmp_path, capsys):
        events = tmp_path / "empty.csv"
        events.write_text("")
        code = run_cli("convert", "--events", events, "--out", tmp_path / "out")
        assert code == 1
        assert "empty stream" in capsys.readouterr().err

    def test_huge_threshold_zero_frames_exit_zero(self, synth_run, tmp_path, capsys):
        events = synth_run / "events" / "events.csv"
        code = run_cli(
            "convert", "--events", events, "--out", tmp_path / "out",
            "--threshold", 10**9,
        )
        captured = capsys.readouterr()
        assert code == 0
        assert "suppressed every window" in captured.err
        assert "wrote 0 frames" in captured.out
        assert list((tmp_path / "out").glob("*.png")) == []


class TestDetectTrackEval:
    def test_centroid_detect_and_track(self, synth_run, tmp_path):
        dets = tmp_path / "dets.json"
        assert run_cli(
            "detect", "--frames", synth_run / "frames", "--baseline", "centroid",
            "--out", dets,
        ) == 0
        payload = json.loads(dets.read_text())
        assert len(payload) == 100
        assert all(0.0 <= r["conf"] <= 1.0 for r in payload)

        out = tmp_path / "track"
        assert run_cli(
            "track", "--detections", dets, "--sidecar", synth_run / "frames" / "frames.csv",
            "--out", out, "--px-per-degree", "10", "--max-gap", "2",
        ) == 0
        assert (out / "trajectory.csv").exists()
        assert (out / "saccades.csv").exists()
        assert (out / "trajectory.png").stat().st_size > 0

    def test_from_json_validates_and_reemits(self, tmp_path):
        src = tmp_path / "src.json"
        save_detections(
            [Detection("frame_000000.png", 0, (10.0, 10.0, 30.0, 30.0), 0.5)], src
        )
        out = tmp_path / "out.json"
        assert run_cli("detect", "--from-json", src, "--out", out) == 0
        assert json.loads(out.read_text())[0]["conf"] == 0.5

    def test_from_json_rejects_bad_records(self, tmp_path, capsys):
        src = tmp_path / "bad.json"
        src.write_text(json.dumps(
            [{"frame": "f.png", "class": 0, "box": [10, 10, 5, 30], "conf": 0.5}]
        ))
        assert run_cli("detect", "--from-json", src, "--out", tmp_path / "o.json") == 1
        assert "degenerate" in capsys.readouterr().err

    def test_detect_requires_exactly_one_source(self, tmp_path, capsys):
        assert run_cli("detect", "--out", tmp_path / "o.json") == 1
        assert "exactly one" in capsys.readouterr().err

    def _write_labels(self, labels_dir, boxes):
        labels_dir.mkdir(parents=True, exist_ok=True)
        for frame_ref, box in boxes.items():
            stem = os.path.splitext(frame_ref)[0]
            geometry = SensorGeometry(346, 260)
            cx = (box[0] + box[2]) / 2 / geometry.width
            cy = (box[1] + box[3]) / 2 / geometry.height
            w = (box[2] - box[0]) / geometry.width
            h = (box[3] - box[1]) / geometry.height
            (labels_dir / f"{stem}.txt").write_text(
                f"0 {cx:.6f} {cy:.6f} {w:.6f} {h:.6f}\n"
            )

    def test_eval_perfect_detections(self, tmp_path, capsys):
        boxes = {
            "frame_000000.png": (10.0, 10.0, 40.0, 40.0),
            "frame_000001.png": (50.0, 60.0, 90.0, 100.0),
        }
        self._write_labels(tmp_path / "labels", boxes)
        dets = [Detection(ref, 0, box, 0.9) for ref, box in boxes.items()]
        save_detections(dets, tmp_path / "dets.json")
        out = tmp_path / "eval"
        assert run_cli(
            "eval", "--detections", tmp_path / "dets.json",
            "--labels", tmp_path / "labels", "--out", out,
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["map"] == 1.0
        assert report["precision"] == 1.0 and report["recall"] == 1.0
        assert (out / "pr_curve.csv").read_text().startswith("confidence,precision,recall")
        assert (out / "pr_curve.png").stat().st_size > 0

    def test_eval_empty_detections_zero_recall(self, tmp_path):
        self._write_labels(tmp_path / "labels", {"frame_000000.png": (10, 10, 40, 40)})
        (tmp_path / "dets.json").write_text("[]")
        out = tmp_path / "eval"
        assert run_cli(
            "eval", "--detections", tmp_path / "dets.json",
            "--labels", tmp_path / "labels", "--out", out,
        ) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["recall"] == 0.0
        assert report["map"] == 0.0

    def test_eval_frame_reference_mismatch(self, tmp_path, capsys):
        self._write_labels(tmp_path / "labels", {"frame_000000.png": (10, 10, 40, 40)})
        save_detections(
            [Detection("frame_000099.png", 0, (10.0, 10.0, 40.0, 40.0), 0.9)],
            tmp_path / "dets.json",
        )
        assert run_cli(
            "eval", "--detections", tmp_path / "dets.json",
            "--labels", tmp_path / "labels", "--out", tmp_path / "eval",
        ) == 1
        assert "frame-reference mismatch" in capsys.readouterr().err

    def test_cli_matches_library_eval(self, tmp_path):
        boxes = {"frame_000000.png": (10.0, 10.0, 40.0, 40.0)}
        self._write_labels(tmp_path / "labels", boxes)
        save_detections(
            [Detection("frame_000000.png", 0, (12.0, 12.0, 40.0, 40.0), 0.8)],
            tmp_path / "dets.json",
        )
        cli_out = tmp_path / "via_cli"
        lib_out = tmp_path / "via_lib"
        assert run_cli(
            "eval", "--detections", tmp_path / "dets.json",
            "--labels", tmp_path / "labels", "--out", cli_out,
        ) == 0
        run_eval(
            str(tmp_path / "dets.json"), str(tmp_path / "labels"), str(lib_out),
            PipelineConfig(),
        )
        assert (cli_out / "report.json").read_bytes() == (lib_out / "report.json").read_bytes()
        assert (cli_out / "pr_curve.csv").read_bytes() == (lib_out / "pr_curve.csv").read_bytes()


class TestDataset:
    @pytest.fixture()
    def events_dir(self, tmp_path):
        events = tmp_path / "events"
        for subject in ("s01", "s02", "s03"):
            for eye in ("left", "right"):
                assert run_cli(
                    "--seed", 3, "synth", "--out", events, "--name", f"{subject}_{eye}",
                    "--path", "linear", "--start", "120,130", "--end", "220,130",
                    "--radius", "3", "--rate", "250", "--duration-ms", "300",
                ) == 0
        return events

    def test_dataset_layout_with_truth_labels(self, events_dir, tmp_path):
        out = tmp_path / "ds"
        assert run_cli(
            "--seed", 5, "dataset", "--events-dir", events_dir, "--out", out,
            "--frames-per-eye", 4, "--ratios", "0.34,0.33,0.33", "--threshold", 100,
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        total = sum(len(v) for v in manifest["splits"].values())
        assert total == 3 * 2 * 4
        subjects = {
            part: {e["subject"] for e in entries}
            for part, entries in manifest["splits"].items()
        }
        assert not subjects["train"] & (subjects["val"] | subjects["test"])
        some_label = next((out / "labels" / "train").glob("*.txt"))
        assert some_label.read_text().startswith("0 ")

    def test_dataset_requires_matching_files(self, tmp_path, capsys):
        empty = tmp_path / "none"
        empty.mkdir()
        assert run_cli("dataset", "--events-dir", empty, "--out", tmp_path / "ds") == 1
        assert "no event files" in capsys.readouterr().err


class TestDeterminism:
    def test_same_seed_byte_identical_any_threads(self, tmp_path):
        digests = []
        for threads in (1, 2, 4):
            root = tmp_path / f"run_t{threads}"
            events = root / "events"
            assert run_cli(
                "--seed", 13, "--threads", threads, "synth", "--out", events,
                "--path", "sine", "--amplitude", "40", "--period-ms", "90",
                "--radius", "2.5", "--rate", "300", "--duration-ms", "300",
            ) == 0
            assert run_cli(
                "--threads", threads, "convert",
                "--events", events / "events.csv", "--out", root / "frames",
            ) == 0
            assert run_cli(
                "--threads", threads, "detect", "--frames", root / "frames",
                "--baseline", "centroid", "--out", root / "dets.json",
            ) == 0
            assert run_cli(
                "track", "--detections", root / "dets.json",
                "--sidecar", root / "frames" / "frames.csv",
                "--out", root / "track", "--px-per-degree", "10",
            ) == 0
            digests.append(tree_digest(root))
        assert digests[0] == digests[1] == digests[2]

    def test_dataset_stage_deterministic(self, tmp_path):
        events = tmp_path / "events"
        for eye in ("left", "right"):
            assert run_cli(
                "--seed", 3, "synth", "--out", events, "--name", f"s01_{eye}",
                "--path", "linear", "--start", "120,130", "--end", "220,130",
                "--radius", "3", "--rate", "250", "--duration-ms", "200",
            ) == 0
        digests = []
        for run in ("a", "b"):
            out = tmp_path / f"ds_{run}"
            assert run_cli(
                "--seed", 17, "dataset", "--events-dir", events, "--out", out,
                "--frames-per-eye", 5, "--ratios", "1,0,0", "--threshold", 100,
            ) == 0
            digests.append(tree_digest(out))
        assert digests[0] == digests[1]


class TestConfig:
    def test_roundtrip_lossless(self, tmp_path):
        config = PipelineConfig(seed=11, threads=2).replace(
            geometry=SensorGeometry(640, 480)
        )
        path = tmp_path / "config.json"
        config.save(path)
        assert load_config(path) == config

    def test_flags_override_config(self, tmp_path, capsys):
        config = PipelineConfig(seed=1)
        path = tmp_path / "config.json"
        config.save(path)
        events = tmp_path / "events"
        # --seed on the command line wins over the config file
        assert run_cli(
            "--config", path, "--seed", 99, "synth", "--out", events,
            "--duration-ms", "20", "--rate", "50", "--radius", "3",
            "--path", "still", "--center", "100,100",
        ) == 0
        baseline = tmp_path / "events99"
        assert run_cli(
            "--seed", 99, "synth", "--out", baseline,
            "--duration-ms", "20", "--rate", "50", "--radius", "3",
            "--path", "still", "--center", "100,100",
        ) == 0
        assert (events / "events.csv").read_bytes() == (baseline / "events.csv").read_bytes()

    def test_geometry_flag(self, tmp_path, capsys):
        events = tmp_path / "ev"
        # disc at (400, 300) only fits the larger sensor
        assert run_cli(
            "--geometry", "640x480", "synth", "--out", events,
            "--path", "still", "--center", "400,300", "--radius", "3",
            "--rate", "50", "--duration-ms", "20",
        ) == 0
        assert run_cli(
            "--geometry", "346x260", "synth", "--out", events,
            "--path", "still", "--center", "400,300", "--radius", "3",
            "--rate", "50", "--duration-ms", "20",
        ) == 1
        assert "leaves sensor bounds" in capsys.readouterr().err

    def test_invalid_geometry_string(self):
        with pytest.raises(SystemExit):
            main(["--geometry", "banana", "synth", "--out", "x"])
