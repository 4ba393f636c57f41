import json

import numpy as np
import pytest

from vcodec.cli import main
from vcodec.distsim import EDGE_4X8GB, EDGE_PLAN, LLAMA3_70B_128K, Scenario, scenario_to_text
from vcodec.tensor import error_metrics, load_tensor


def run(argv, capsys=None):
    code = main(argv)
    return code


@pytest.fixture()
def weight_file(tmp_path):
    path = tmp_path / "w.vctn"
    assert main([
        "gen", "--rows", "96", "--cols", "96", "--channel-corr", "0.9",
        "--seed", "3", "--out", str(path),
    ]) == 0
    return path


class TestRoundtrip:
    def test_compress_then_decompress_meets_target(self, tmp_path, weight_file):
        bs = tmp_path / "w.vcbs"
        out = tmp_path / "back.vctn"
        assert main([
            "compress", "--in", str(weight_file), "--target-mse", "0.01",
            "--out", str(bs),
        ]) == 0
        assert main(["decompress", "--in", str(bs), "--out", str(out)]) == 0
        orig = load_tensor(weight_file)
        back = load_tensor(out)
        assert error_metrics(orig, back).mse <= 0.01

    def test_rotate_flag(self, tmp_path, weight_file):
        bs = tmp_path / "wr.vcbs"
        assert main([
            "compress", "--in", str(weight_file), "--target-mse", "0.01",
            "--rotate", "--seed", "5", "--out", str(bs),
        ]) == 0
        out = tmp_path / "back.vctn"
        assert main(["decompress", "--in", str(bs), "--out", str(out)]) == 0
        assert error_metrics(load_tensor(weight_file), load_tensor(out)).mse <= 0.01

    def test_deterministic_artifacts(self, tmp_path, weight_file):
        a = tmp_path / "a.vcbs"
        b = tmp_path / "b.vcbs"
        args = ["compress", "--in", str(weight_file), "--target-mse", "0.02"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestReports:
    def test_ablate_csv_four_rows_first_eight(self, tmp_path, weight_file):
        report = tmp_path / "ablate.csv"
        assert main([
            "ablate", "--in", str(weight_file), "--target-mse", "0.01",
            "--report", str(report),
        ]) == 0
        lines = report.read_text().splitlines()
        assert lines[0].startswith("# vcodec")
        assert lines[1] == "tensor_id,stage_set,qp,bits_per_value,mse,bytes"
        rows = [line.split(",") for line in lines[2:]]
        assert len(rows) == 4
        assert rows[0][1] == "baseline"
        assert float(rows[0][3]) == 8.0

    def test_sweep_json(self, tmp_path, weight_file):
        report = tmp_path / "sweep.json"
        assert main([
            "sweep", "--in", str(weight_file), "--qps", "8,40",
            "--report", str(report), "--format", "json",
        ]) == 0
        doc = json.loads(report.read_text())
        assert len(doc["reports"]) == 2
        assert doc["meta"]["command"].startswith("vcodec sweep")

    def test_grad_sim_accounting(self, tmp_path, capsys):
        report = tmp_path / "grad.json"
        assert main(["grad-sim", "--report", str(report)]) == 0
        doc = json.loads(report.read_text())
        assert doc["schedule"]["average_bits"] == pytest.approx(10.09375)
        out = capsys.readouterr().out
        assert "10.09" in out


class TestHwModel:
    def test_energy_prints_4_32(self, capsys):
        assert main(["hw-model", "energy", "--comm", "nccl", "--codec", "t264", "--ratio", "5"]) == 0
        assert capsys.readouterr().out.strip() == "4.32"

    def test_ratio_prints_31_7(self, capsys):
        assert main(["hw-model", "ratio", "--comm", "nccl", "--codec", "t264"]) == 0
        assert capsys.readouterr().out.strip() == "31.7"

    def test_plan(self, capsys):
        assert main([
            "hw-model", "plan", "--model-bytes", "1e9", "--memory-bytes", "8e9",
            "--devices", "4",
        ]) == 0
        assert capsys.readouterr().out.strip() == "pp=1 dp=4"

    def test_sweep_csv(self, tmp_path):
        report = tmp_path / "bw.csv"
        assert main([
            "hw-model", "sweep", "--type", "bandwidth", "--points", "1,10,100",
            "--report", str(report),
        ]) == 0
        lines = report.read_text().splitlines()
        assert len(lines) == 5  # meta + header + 3 rows


class TestDistSim:
    def test_scenario_summary(self, tmp_path):
        scn = tmp_path / "edge.scn"
        scn.write_text(scenario_to_text(Scenario(LLAMA3_70B_128K, EDGE_4X8GB, EDGE_PLAN)))
        summary = tmp_path / "s.json"
        assert main(["dist-sim", "--scenario", str(scn), "--summary", str(summary)]) == 0
        doc = json.loads(summary.read_text())
        assert doc["fits"] is True
        assert doc["memory_gb"]["weights_gb"] == pytest.approx(6.3, abs=0.1)

    def test_stream_trace(self, tmp_path):
        scn = tmp_path / "edge.scn"
        scn.write_text(scenario_to_text(Scenario(LLAMA3_70B_128K, EDGE_4X8GB, EDGE_PLAN)))
        trace = tmp_path / "trace.csv"
        assert main([
            "dist-sim", "--scenario", str(scn), "--stream-tensors", "1",
            "--tokens", "64", "--channels", "64", "--report", str(trace),
        ]) == 0
        lines = trace.read_text().splitlines()
        assert lines[1] == "boundary_id,step,bytes,mse"
        assert len(lines) == 2 + 3  # three boundaries, one tensor


class TestExitCodes:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_input_exits_3(self, tmp_path):
        assert main([
            "compress", "--in", str(tmp_path / "missing.vctn"),
            "--target-mse", "0.01", "--out", str(tmp_path / "o.vcbs"),
        ]) == 3

    def test_bad_magic_exits_3(self, tmp_path):
        bad = tmp_path / "bad.vctn"
        bad.write_bytes(b"JUNKJUNKJUNKJUNK" + bytes(32))
        assert main([
            "compress", "--in", str(bad), "--target-mse", "0.01",
            "--out", str(tmp_path / "o.vcbs"),
        ]) == 3

    def test_infeasible_target_exits_4(self, tmp_path, weight_file):
        assert main([
            "compress", "--in", str(weight_file), "--target-bits", "0.01",
            "--out", str(tmp_path / "o.vcbs"),
        ]) == 4

    def test_both_targets_exits_2(self, tmp_path, weight_file):
        with pytest.raises(SystemExit) as exc:
            main([
                "compress", "--in", str(weight_file), "--target-mse", "0.1",
                "--target-bits", "3", "--out", str(tmp_path / "o.vcbs"),
            ])
        assert exc.value.code == 2
