import json
import subprocess
import sys
import urllib.request

import numpy as np
import pytest

from hardlabel import cli
from hardlabel.attack import AttackConfig
from hardlabel.harness import ExperimentSpec, InputSpec
from hardlabel.oracles import diagonal_halfspace_spec


def run_cli(argv, capsys):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestAttackCommand:
    def test_inline_halfspace_run(self, tmp_path, capsys):
        out_file = tmp_path / "trace.jsonl"
        code, out, _ = run_cli(
            ["attack", "--oracle", "halfspace:dim=16,margin=0.4", "--budget", "400",
             "--seed", "7", "--B0", "20", "--T", "5", "--out", str(out_file)],
            capsys,
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["succeeded"] is True
        assert summary["queries"] <= 400
        lines = out_file.read_text().strip().splitlines()
        assert all("query" in json.loads(line) for line in lines)

    def test_oracle_spec_file(self, tmp_path, capsys):
        spec_path = tmp_path / "oracle.json"
        spec_path.write_text(json.dumps(diagonal_halfspace_spec(12, 0.3).to_dict()))
        code, out, _ = run_cli(
            ["attack", "--oracle", str(spec_path), "--budget", "300", "--B0", "10",
             "--T", "4", "--out", str(tmp_path / "t.jsonl")],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["oracle"] == "halfspace-d12"

    def test_runtime_error_is_machine_readable(self, capsys):
        code, _, err = run_cli(["attack", "--oracle", "bogus:dim=4", "--out", "/dev/null"], capsys)
        assert code == 1
        payload = json.loads(err)
        assert payload["error"] == "ValueError"

    def test_usage_error_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["attack"])  # missing --oracle
        assert exc.value.code == 2

    def test_config_file_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "defaults.json"
        cfg.write_text(json.dumps({"budget": 123, "B0": 9}))
        out_file = tmp_path / "t.jsonl"
        code, out, _ = run_cli(
            ["--config", str(cfg), "attack", "--oracle", "halfspace:dim=12,margin=0.3",
             "--T", "3", "--out", str(out_file)],
            capsys,
        )
        assert code == 0
        assert json.loads(out)["budget"] == 123


class TestBenchCommand:
    def spec_file(self, tmp_path, out_dir):
        spec = ExperimentSpec(
            oracles=[diagonal_halfspace_spec(12, 0.3)],
            methods=[AttackConfig(mode="hemisphere", B0=10, T=4, name="tangent")],
            inputs=InputSpec(kind="halfspace_margin", count=2, margin=(0.2, 0.3)),
            budgets=[50, 300],
            seed=3,
            output_dir=str(out_dir),
        )
        path = tmp_path / "spec.json"
        path.write_text(json.dumps(spec.to_dict()))
        return path

    def test_bench_runs_and_is_deterministic(self, tmp_path, capsys):
        path_a = self.spec_file(tmp_path, tmp_path / "out_a")
        code, out_a, _ = run_cli(["bench", str(path_a)], capsys)
        assert code == 0
        path_b = self.spec_file(tmp_path, tmp_path / "out_b")
        code, out_b, _ = run_cli(["bench", str(path_b)], capsys)
        assert code == 0
        assert out_a == out_b
        assert (tmp_path / "out_a" / "results.csv").read_bytes() == \
               (tmp_path / "out_b" / "results.csv").read_bytes()


class TestVerifyCommand:
    def test_verify_reports_pass_lines(self, capsys):
        code, out, _ = run_cli(["verify", "--samples", "20000", "--instances", "8"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 4
        assert all(line.startswith("PASS") for line in lines)


class TestServeMock:
    def test_serve_mock_subprocess_roundtrip(self, tmp_path):
        spec_path = tmp_path / "oracle.json"
        spec_path.write_text(json.dumps(diagonal_halfspace_spec(4, 0.3).to_dict()))
        proc = subprocess.Popen(
            [sys.executable, "-m", "hardlabel.cli", "serve-mock", "--oracle", str(spec_path)],
            stdout=subprocess.PIPE, text=True,
        )
        try:
            endpoint = json.loads(proc.stdout.readline())["endpoint"]
            body = json.dumps({"input": [1.0, 1.0, 1.0, 1.0]}).encode()
            req = urllib.request.Request(
                endpoint + "/classify", data=body,
                headers={"Content-Type": "application/json"}, method="POST",
            )
            with urllib.request.urlopen(req, timeout=5) as resp:
                assert json.loads(resp.read())["label"] == 1
        finally:
            proc.terminate()
            proc.wait(timeout=5)
