import json

import pytest

from lanesim.cli import main
from lanesim.records import RolloutRecord
from lanesim.runconfig import apply_env_overrides, load_run_config, ConfigError


@pytest.fixture()
def workspace(tmp_path):
    rc = main(
        [
            "generate",
            "--rows",
            "2",
            "--cols",
            "2",
            "--block-len",
            "120",
            "--lanes",
            "1",
            "--agents",
            "6",
            "--seed",
            "3",
            "--out",
            str(tmp_path / "grid.lcs.json"),
        ]
    )
    assert rc == 0
    rc = main(["route", str(tmp_path / "grid.lcs.json"), "--in-place"])
    assert rc == 0
    return tmp_path


def write_config(tmp_path, **overrides):
    cfg = {
        "scenario": "grid.lcs.json",
        "duration": 3.0,
        "policy": "expert",
        "seed": 1,
        "out_dir": "run",
        "spawn_gating": False,
    }
    cfg.update(overrides)
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


class TestGenerateRoute:
    def test_generate_writes_canonical_file(self, tmp_path):
        out = tmp_path / "a.lcs.json"
        assert main(["generate", "--agents", "0", "--seed", "1", "--out", str(out)]) == 0
        assert out.exists()
        doc = json.loads(out.read_text())
        assert doc["format_version"] == 1

    def test_generate_rejects_bad_geometry(self, tmp_path):
        rc = main(
            ["generate", "--block-len", "10", "--lanes", "3", "--agents", "0", "--out", str(tmp_path / "x.json")]
        )
        assert rc == 1

    def test_route_not_in_place_keeps_input(self, tmp_path):
        src = tmp_path / "g.lcs.json"
        main(["generate", "--agents", "4", "--seed", "2", "--out", str(src)])
        before = src.read_bytes()
        rc = main(["route", str(src), "--out", str(tmp_path / "routed.lcs.json")])
        assert rc == 0
        assert src.read_bytes() == before
        assert (tmp_path / "routed.lcs.json").exists()

    def test_route_missing_file(self, tmp_path):
        assert main(["route", str(tmp_path / "nope.lcs.json")]) == 1


class TestSimulate:
    def test_outputs_and_determinism(self, workspace):
        cfg_path = write_config(workspace)
        assert main(["simulate", str(cfg_path)]) == 0
        run = workspace / "run"
        assert (run / "scenario.lcs.json").exists()
        assert (run / "events.ndjson").exists()
        recs = sorted((run / "records").glob("*.npz"))
        assert recs
        h1 = RolloutRecord.load(recs[0]).content_hash()
        # run again: identical record hash
        assert main(["simulate", str(cfg_path)]) == 0
        h2 = RolloutRecord.load(recs[0]).content_hash()
        assert h1 == h2

    def test_render_emits_frames(self, workspace):
        cfg_path = write_config(workspace, render=True, render_every=10, duration=1.0)
        assert main(["simulate", str(cfg_path)]) == 0
        frames = list((workspace / "run" / "frames").glob("frame_*.svg"))
        assert frames
        assert frames[0].read_text().startswith("<svg")

    def test_bad_config_field_names_file(self, workspace):
        p = workspace / "bad.json"
        p.write_text(json.dumps({"scenario": "grid.lcs.json", "warp": 9}))
        assert main(["simulate", str(p)]) == 1

    def test_missing_scenario_is_validation_error(self, tmp_path):
        p = write_config(tmp_path)
        assert main(["simulate", str(p)]) == 1


class TestEvaluate:
    def test_report_from_records(self, workspace):
        cfg_path = write_config(workspace, repeat=2)
        assert main(["simulate", str(cfg_path)]) == 0
        assert main(["evaluate", "--records", str(workspace / "run" / "records")]) == 0
        report = json.loads((workspace / "run" / "report.json").read_text())
        assert report["n_records"] == 2
        assert "collision_pct" in report["violation_rates"]

    def test_repeat_produces_error_bars(self, workspace):
        cfg_path = write_config(workspace, policy="lane_idm", duration=2.0)
        assert main(["evaluate", "--config", str(cfg_path), "--repeat", "3"]) == 0
        report = json.loads((workspace / "run" / "report.json").read_text())
        assert report["n_records"] == 3
        assert "stderr" in report["violation_rates"]["collision_pct"]


class TestJobsAndPlots:
    def test_parallel_jobs_match_sequential(self, workspace):
        seq_cfg = write_config(workspace, repeat=2, out_dir="seq")
        assert main(["simulate", str(seq_cfg)]) == 0
        par_cfg = write_config(workspace, repeat=2, out_dir="par", jobs=2)
        assert main(["simulate", str(par_cfg)]) == 0
        for name in ["grid_seed1.npz", "grid_seed2.npz"]:
            a = RolloutRecord.load(workspace / "seq" / "records" / name)
            b = RolloutRecord.load(workspace / "par" / "records" / name)
            assert a.content_hash() == b.content_hash()

    def test_plot_emission(self, workspace):
        cfg_path = write_config(workspace, policy="lane_idm", duration=2.0)
        assert main(["simulate", str(cfg_path)]) == 0
        assert (
            main(
                [
                    "evaluate",
                    "--records",
                    str(workspace / "run" / "records"),
                    "--plots",
                    str(workspace / "plots"),
                ]
            )
            == 0
        )
        svgs = list((workspace / "plots").glob("*.svg"))
        assert len(svgs) == 3


class TestBench:
    def test_bench_prints_times(self, workspace, capsys):
        cfg_path = write_config(workspace, policy="lane_idm", duration=1.0)
        assert main(["bench", str(cfg_path), "--repeat", "2"]) == 0
        out = capsys.readouterr().out
        assert "mean wall time per scenario" in out


class TestRunConfig:
    def test_env_override(self):
        doc = {"scenario": "a", "seed": 1}
        out = apply_env_overrides(doc, environ={"LCSIM_SEED": "42", "OTHER": "x"})
        assert out["seed"] == 42

    def test_env_override_types(self):
        out = apply_env_overrides({}, environ={"LCSIM_RENDER": "true", "LCSIM_OUT_DIR": "x/y"})
        assert out["render"] is True
        assert out["out_dir"] == "x/y"

    def test_unknown_field_rejected(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"scenario": "a", "bogus": 1}))
        with pytest.raises(ConfigError, match="bogus"):
            load_run_config(p)

    def test_bad_json_position(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"scenario": }')
        with pytest.raises(ConfigError, match="line"):
            load_run_config(p)


def test_train_planner_synthetic_smoke(tmp_path):
    out = tmp_path / "ckpt.npz"
    rc = main(
        [
            "train-planner",
            "--synthetic",
            "4",
            "--steps",
            "3",
            "--seed",
            "0",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    assert out.exists()
    losses = (tmp_path / "ckpt.losses.ndjson").read_text().strip().splitlines()
    assert len(losses) == 3
    from lanesim.diffusion import DiffusionPlanner

    planner = DiffusionPlanner.load(out)
    assert planner.config.n_future == 80
