import json

import numpy as np
import pytest

from trajkit.cli import main
from trajkit.ingest import SceneCache, Straight, synth_scene
from trajkit.vecmap import VectorMap, map_serialize

from conftest import straight_lane

HEADER = "scene_id,agent_id,agent_type,frame,x,y,z,heading,length,width,height"


@pytest.fixture
def workspace(tmp_path):
    cache_dir = tmp_path / "cache"
    SceneCache(cache_dir).write(synth_scene(Straight(10.0), 1, 100, 0.1))
    return tmp_path, cache_dir


def _write_inputs(tmp_path, rows=None):
    rows = rows or [
        "s0,a,vehicle,0,0.0,0.0,,,,,",
        "s0,a,vehicle,1,1.0,0.0,,,,,",
        "s0,a,vehicle,2,2.0,0.0,,,,,",
        "s0,b,vehicle,0,0.0,5.0,,,,,",
        "s0,b,vehicle,1,1.0,5.0,,,,,",
        "s0,b,vehicle,2,2.0,5.0,,,,,",
    ]
    csv_path = tmp_path / "in.csv"
    csv_path.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
    meta_path = tmp_path / "meta.json"
    meta_path.write_text(json.dumps({"scene_id": "s0", "dt": 0.1, "location": "loc", "dataset": "toy"}))
    return csv_path, meta_path


def _map_file(tmp_path, lanes=None):
    lanes = lanes or [straight_lane("L1", 0.0, length=500.0), straight_lane("L2", 10.0, length=500.0)]
    path = tmp_path / "map.tkmap"
    path.write_bytes(map_serialize(VectorMap("toy:flat", lanes)))
    return path


class TestIngestCommand:
    def test_valid_csv(self, tmp_path, capsys):
        csv_path, meta_path = _write_inputs(tmp_path)
        cache = tmp_path / "cache"
        code = main(["ingest", "--input", str(csv_path), "--format", "canonical-csv", "--meta", str(meta_path), "--cache", str(cache)])
        assert code == 0
        assert (cache / "toy" / "s0.tksc").exists()
        assert "ingested 1 scenes, 2 agents" in capsys.readouterr().out

    def test_malformed_csv_exit_2(self, tmp_path, capsys):
        csv_path, meta_path = _write_inputs(tmp_path, rows=['s0,a,vehicle,0,"12,3",0.0,,,,,'])
        code = main(["ingest", "--input", str(csv_path), "--format", "canonical-csv", "--meta", str(meta_path), "--cache", str(tmp_path / "c")])
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_unknown_format_exit_64(self, tmp_path):
        csv_path, meta_path = _write_inputs(tmp_path)
        code = main(["ingest", "--input", str(csv_path), "--format", "parquet", "--meta", str(meta_path), "--cache", str(tmp_path / "c")])
        assert code == 64

    def test_validation_failure_exit_3(self, tmp_path):
        rows = ["s0,a,vehicle,0,nan,0.0,,,,,", "s0,a,vehicle,1,1.0,0.0,,,,,"]
        csv_path, meta_path = _write_inputs(tmp_path, rows=rows)
        code = main(["ingest", "--input", str(csv_path), "--format", "canonical-csv", "--meta", str(meta_path), "--cache", str(tmp_path / "c")])
        assert code == 3

    def test_frame_text_format(self, tmp_path):
        data = tmp_path / "peds.txt"
        data.write_text("0 1 0.0 0.0\n1 1 1.0 0.0\n")
        meta = tmp_path / "meta.json"
        meta.write_text(json.dumps({"scene_id": "e0", "dt": 0.4, "location": "univ", "dataset": "eth"}))
        code = main(["ingest", "--input", str(data), "--format", "frame-text", "--meta", str(meta), "--cache", str(tmp_path / "c")])
        assert code == 0

    def test_missing_cache_flag_exit_64(self, tmp_path, monkeypatch):
        monkeypatch.delenv("TRAJKIT_CACHE", raising=False)
        csv_path, meta_path = _write_inputs(tmp_path)
        code = main(["ingest", "--input", str(csv_path), "--format", "canonical-csv", "--meta", str(meta_path)])
        assert code == 64

    def test_cache_env_var_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TRAJKIT_CACHE", str(tmp_path / "envcache"))
        csv_path, meta_path = _write_inputs(tmp_path)
        code = main(["ingest", "--input", str(csv_path), "--format", "canonical-csv", "--meta", str(meta_path)])
        assert code == 0
        assert (tmp_path / "envcache" / "toy" / "s0.tksc").exists()

    def test_missing_input_exit_5(self, tmp_path):
        _, meta_path = _write_inputs(tmp_path)
        code = main(["ingest", "--input", str(tmp_path / "nope.csv"), "--format", "canonical-csv", "--meta", str(meta_path), "--cache", str(tmp_path / "c")])
        assert code == 5


class TestAnalyzeCommand:
    def test_two_metrics(self, workspace, capsys):
        tmp_path, cache_dir = workspace
        out = tmp_path / "report"
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "speed,path_efficiency", "--out", str(out)])
        assert code == 0
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert csvs == ["path_efficiency__synth__vehicle.csv", "speed__synth__vehicle.csv"]

    def test_offroad_without_map_unavailable(self, workspace):
        tmp_path, cache_dir = workspace
        out = tmp_path / "report"
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "offroad", "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "rates.json").read_text())
        assert payload["unavailable"] == ["offroad"]

    def test_offroad_with_map(self, workspace):
        tmp_path, cache_dir = workspace
        map_path = _map_file(tmp_path, lanes=[straight_lane("L1", 0.0, length=200.0, half_width=3.0)])
        out = tmp_path / "report"
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "offroad", "--map", str(map_path), "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "rates.json").read_text())
        assert payload["rates"]["offroad"]["synth"]["vehicle"]["rate"] == 0.0

    def test_unknown_metric_exit_64_lists_names(self, workspace, capsys):
        tmp_path, cache_dir = workspace
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "bogus", "--out", str(tmp_path / "o")])
        assert code == 64
        assert "speed" in capsys.readouterr().err

    def test_unknown_tag_exit_2(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "nope", "--metrics", "speed", "--out", str(tmp_path / "o")])
        assert code == 2

    def test_config_file_respected(self, workspace):
        tmp_path, cache_dir = workspace
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"stationary_threshold": 50.0}))
        out = tmp_path / "report"
        code = main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "stationary", "--config", str(cfg_path), "--out", str(out)])
        assert code == 0
        payload = json.loads((out / "rates.json").read_text())
        assert payload["config"]["stationary_threshold"] == 50.0

    def test_idempotent_outputs(self, workspace):
        tmp_path, cache_dir = workspace
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["analyze", "--cache", str(cache_dir), "--tags", "synth", "--metrics", "speed,harsh_accel", "--out", str(out)]) == 0
            outs.append(out)
        for p1 in sorted(outs[0].iterdir()):
            assert p1.read_bytes() == (outs[1] / p1.name).read_bytes()


class TestMapCommand:
    def test_closest_lane_on_centerline(self, tmp_path, capsys):
        map_path = _map_file(tmp_path)
        code = main(["map", "--map", str(map_path), "closest-lane", "--point", "5.0,0.0,0.0"])
        assert code == 0
        out = capsys.readouterr().out.strip()
        assert out.startswith("L1 ") and out.endswith("0.0")

    def test_stats(self, tmp_path, capsys):
        map_path = _map_file(tmp_path)
        code = main(["map", "--map", str(map_path), "stats"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lane_length_km"] == pytest.approx(1.0)

    def test_corrupt_map_exit_2(self, tmp_path):
        bad = tmp_path / "bad.tkmap"
        bad.write_bytes(b"not a map at all")
        code = main(["map", "--map", str(bad), "stats"])
        assert code == 2

    def test_bad_point_exit_64(self, tmp_path):
        map_path = _map_file(tmp_path)
        assert main(["map", "--map", str(map_path), "closest-lane", "--point", "x,y"]) == 64


class TestBatchCommand:
    def test_manifest_reports_50_elements(self, workspace):
        tmp_path, cache_dir = workspace
        out = tmp_path / "batches"
        code = main(
            ["batch", "--cache", str(cache_dir), "--tags", "synth", "--centric", "agent",
             "--history", "1,3", "--future", "4,4", "--out", str(out)]
        )
        assert code == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["n_elements"] == 50

    def test_impossible_future_exit_4(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(
            ["batch", "--cache", str(cache_dir), "--tags", "synth",
             "--history", "1,3", "--future", "60,60", "--out", str(tmp_path / "b")]
        )
        assert code == 4

    def test_bad_resample_ratio_exit_2(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(
            ["batch", "--cache", str(cache_dir), "--tags", "synth",
             "--history", "1,3", "--future", "4,4", "--dt", "0.25", "--out", str(tmp_path / "b")]
        )
        assert code == 2

    def test_bad_window_exit_64(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(
            ["batch", "--cache", str(cache_dir), "--tags", "synth",
             "--history", "1", "--future", "4,4", "--out", str(tmp_path / "b")]
        )
        assert code == 64


class TestSimReplayCommand:
    def test_replay_metrics_zero_distance(self, workspace):
        tmp_path, cache_dir = workspace
        out = tmp_path / "sim"
        code = main(["sim-replay", "--cache", str(cache_dir), "--scene", "synth-0", "--init-ts", "10", "--steps", "10", "--out", str(out)])
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["speed_distance"] == 0.0
        assert (out / "rollout.csv").exists()

    def test_steps_beyond_scene_exit_2(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(["sim-replay", "--cache", str(cache_dir), "--scene", "synth-0", "--init-ts", "95", "--steps", "10", "--out", str(tmp_path / "sim")])
        assert code == 2

    def test_unknown_scene_exit_2(self, workspace):
        tmp_path, cache_dir = workspace
        code = main(["sim-replay", "--cache", str(cache_dir), "--scene", "ghost", "--init-ts", "0", "--steps", "5", "--out", str(tmp_path / "sim")])
        assert code == 2

    def test_unwritable_out_exit_5(self, workspace):
        tmp_path, cache_dir = workspace
        blocker = tmp_path / "blocked"
        blocker.write_text("i am a file")
        code = main(["sim-replay", "--cache", str(cache_dir), "--scene", "synth-0", "--init-ts", "10", "--steps", "10", "--out", str(blocker)])
        assert code == 5

    def test_replay_idempotent(self, workspace):
        tmp_path, cache_dir = workspace
        outs = []
        for name in ("sim1", "sim2"):
            out = tmp_path / name
            assert main(["sim-replay", "--cache", str(cache_dir), "--scene", "synth-0", "--init-ts", "10", "--steps", "10", "--out", str(out)]) == 0
            outs.append(out)
        for p1 in sorted(outs[0].iterdir()):
            assert p1.read_bytes() == (outs[1] / p1.name).read_bytes()


class TestUsage:
    def test_no_command_exit_64(self):
        assert main([]) == 64

    def test_unknown_command_exit_64(self):
        assert main(["frobnicate"]) == 64
