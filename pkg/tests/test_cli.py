from __future__ import annotations

import json

import pytest

from motionlab.cli import EXIT_CONFIG, EXIT_OK, main
from motionlab.executor import RunRecord

from conftest import straight_map_doc


@pytest.fixture()
def straight_map_file(tmp_path):
    path = tmp_path / "map.json"
    path.write_text(json.dumps(straight_map_doc()))
    return path


def write_config(tmp_path, doc):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


class TestSimulate:
    def test_short_run_writes_record(self, tmp_path, capsys):
        out = tmp_path / "run.jsonl"
        code = main(
            [
                "simulate",
                "--steps",
                "10",
                "--policy",
                "pursuit",
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        record = RunRecord.load(out)
        assert record.n_steps == 10
        metrics = json.loads(capsys.readouterr().out)
        assert set(metrics) >= {"cra_a", "cra_l", "cd", "as"}

    def test_bad_config_exits_2(self, tmp_path):
        cfg = write_config(tmp_path, {"H_c": 9, "H_p": 8})
        assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG

    def test_unknown_policy_exits_2(self):
        assert main(["simulate", "--policy", "telepathy"]) == EXIT_CONFIG

    def test_bad_wire_endpoint_exits_4(self):
        assert main(["simulate", "--policy", "wire:127.0.0.1:1", "--steps", "2"]) == 4

    def test_custom_map_and_config(self, tmp_path, straight_map_file, capsys):
        cfg = write_config(
            tmp_path,
            {
                "steps": 5,
                "n_agent": 1,
                "placements": [{"x": 0.5, "y": 0.0, "yaw": 0.0, "speed": 0.5, "path": "main"}],
            },
        )
        code = main(
            ["simulate", "--map", str(straight_map_file), "--config", str(cfg), "--steps", "5"]
        )
        assert code == EXIT_OK


class TestBenchReportExport:
    def test_end_to_end(self, tmp_path, capsys):
        matrix = {
            "master_seed": 5,
            "policy": {"name": "pursuit", "lookahead": 0.25, "target_speed": 0.75},
            "policy_seeds": [0],
            "repetitions": 1,
            "placements": [
                [
                    {"x": 1.0, "y": 0.4, "yaw": 0.0, "speed": 0.75, "path": "loop"},
                    {"x": 2.5, "y": 0.4, "yaw": 0.0, "speed": 0.75, "path": "loop"},
                ]
            ],
            "environments": [{"name": "sim", "config": {"steps": 12}}],
        }
        matrix_file = tmp_path / "matrix.json"
        matrix_file.write_text(json.dumps(matrix))
        out = tmp_path / "results"
        assert main(["bench", "--matrix", str(matrix_file), "--out", str(out)]) == EXIT_OK
        assert (out / "summary.json").exists()
        capsys.readouterr()

        assert main(["report", "--in", str(out), "--format", "md"]) == EXIT_OK
        table = capsys.readouterr().out
        assert "| sim |" in table

        csv_out = tmp_path / "traj.csv"
        code = main(
            ["export", "--in", str(out), "--select", "closest-cd", "--out", str(csv_out)]
        )
        assert code == EXIT_OK
        assert csv_out.read_text().startswith("agent,step,x,y")

    def test_report_missing_dir_exits_2(self, tmp_path):
        assert main(["report", "--in", str(tmp_path / "nope")]) == EXIT_CONFIG

    def test_export_unknown_run_exits_2(self, tmp_path):
        assert main(["export", "--in", str(tmp_path / "nope")]) == EXIT_CONFIG
