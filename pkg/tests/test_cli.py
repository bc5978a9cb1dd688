import json

import numpy as np
import pytest

from artiseg.cli import main
from artiseg.pipeline import PipelineConfig
from artiseg.errors import InputFormatError
from artiseg.formats import write_json_atomic
from artiseg.synth import drawer_scene_spec, generate_scene


@pytest.fixture(scope="module")
def drawer_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli_drawer")
    spec = drawer_scene_spec(seed=5, n_frames=6, pull=0.24)
    generate_scene(spec, out_dir=base)
    write_json_atomic(base / "spec.json", spec.to_json_dict())
    return base


class TestEstimateCommand:
    def test_estimate_succeeds_and_reports_prismatic(self, drawer_dir, tmp_path):
        out = tmp_path / "out"
        code = main(["estimate", str(drawer_dir), "--out", str(out)])
        assert code == 0
        result = json.loads((out / "result.json").read_text())
        assert result["joint"]["type"] == "prismatic"
        assert len(result["motions"]) == 6
        assert result["motions"][0] == 0.0
        assert result["motion_range"][1] == pytest.approx(0.24, abs=0.01)
        assert (out / "segmentation.ply").exists()
        assert (out / "reference_cloud.ply").exists()
        assert (out / "labels.json").exists()

    def test_dump_diagnostics_writes_jsonl(self, drawer_dir, tmp_path):
        out = tmp_path / "diag"
        code = main(["estimate", str(drawer_dir), "--out", str(out),
                     "--dump-diagnostics"])
        assert code == 0
        lines = (out / "diagnostics.jsonl").read_text().strip().splitlines()
        entries = [json.loads(line) for line in lines]
        assert all({"iter", "cost", "num_correspondences", "joint", "motions"}
                   <= set(e) for e in entries)

    def test_missing_keypoints_exit_2_names_frame(self, drawer_dir, tmp_path, capsys, caplog):
        broken = tmp_path / "broken"
        import shutil
        shutil.copytree(drawer_dir, broken)
        (broken / "frames" / "frame_002_keypoints.json").unlink()
        code = main(["estimate", str(broken), "--out", str(tmp_path / "o")])
        assert code == 2
        assert any("frame 2" in rec.message for rec in caplog.records)

    def test_single_frame_exit_2(self, drawer_dir, tmp_path):
        solo = tmp_path / "solo"
        import shutil
        shutil.copytree(drawer_dir, solo)
        for path in sorted((solo / "frames").iterdir()):
            if "frame_000" not in path.name:
                path.unlink()
        assert main(["estimate", str(solo), "--out", str(tmp_path / "o")]) == 2

    def test_unknown_config_key_exit_2(self, drawer_dir, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"voxel_size": 0.01, "bogus_knob": 1}))
        assert main(["estimate", str(drawer_dir), "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 2


class TestSynthCommand:
    def test_synth_writes_scene(self, drawer_dir, tmp_path):
        out = tmp_path / "scene"
        code = main(["synth", str(drawer_dir / "spec.json"), "--out", str(out)])
        assert code == 0
        assert (out / "truth.json").exists()
        assert (out / "frames" / "frame_000_depth.png").exists()

    def test_rerun_is_byte_identical(self, drawer_dir, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["synth", str(drawer_dir / "spec.json"), "--out", str(out_a)]) == 0
        assert main(["synth", str(drawer_dir / "spec.json"), "--out", str(out_b)]) == 0
        for rel in ["frames/frame_000_depth.png", "frames/frame_003_depth.png",
                    "background_depth.png", "truth.json"]:
            assert (out_a / rel).read_bytes() == (out_b / rel).read_bytes()

    def test_missing_spec_exit_2(self, tmp_path):
        assert main(["synth", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2


class TestEvalCommand:
    def test_estimate_then_eval_metrics(self, drawer_dir, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["estimate", str(drawer_dir), "--out", str(out)]) == 0
        capsys.readouterr()
        code = main(["eval", str(out / "result.json"), str(drawer_dir / "truth.json")])
        assert code == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["classification_correct"] is True
        # loose plumbing-level bound; the tight accuracy gates live in
        # test_acceptance.py on the full-size scenes
        assert metrics["direction_error_deg"] < 2.0
        assert metrics["segmentation_iou"] > 0.9

    def test_perfect_estimate_scores_zero(self, drawer_dir, tmp_path, capsys):
        truth = json.loads((drawer_dir / "truth.json").read_text())
        result = {"joint": truth["joint"],
                  "motions": [-s for s in truth["motion_schedule"]]}
        result_path = tmp_path / "result.json"
        result_path.write_text(json.dumps(result))
        assert main(["eval", str(result_path), str(drawer_dir / "truth.json")]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["direction_error_deg"] == pytest.approx(0.0, abs=1e-9)
        assert metrics["motion_rmse"] == pytest.approx(0.0, abs=1e-12)

    def test_type_mismatch_reported_not_fatal(self, drawer_dir, tmp_path, capsys):
        result = {"joint": {"type": "revolute", "axis_direction": [0.0, 1.0, 0.0],
                            "axis_point": [0.0, 0.0, 1.0]},
                  "motions": [0.0] * 6}
        result_path = tmp_path / "result.json"
        result_path.write_text(json.dumps(result))
        assert main(["eval", str(result_path), str(drawer_dir / "truth.json")]) == 0
        metrics = json.loads(capsys.readouterr().out)
        assert metrics["classification_correct"] is False


class TestPipelineConfig:
    def test_defaults_profile_round_trips(self):
        cfg = PipelineConfig()
        rebuilt = PipelineConfig.from_json_dict(cfg.to_json_dict())
        assert rebuilt == cfg

    def test_nested_override(self):
        cfg = PipelineConfig.from_json_dict(
            {"voxel_size": 0.02, "alignment": {"outer_iterations": 5}})
        assert cfg.voxel_size == 0.02
        assert cfg.alignment.outer_iterations == 5
        assert cfg.alignment.max_corr_dist == 0.10  # untouched default

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(InputFormatError):
            PipelineConfig.from_json_dict({"alignment": {"outer_iter": 5}})
