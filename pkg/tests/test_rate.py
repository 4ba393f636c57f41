import csv
import json

import numpy as np
import pytest

from vcodec.codec import CodecConfig
from vcodec.errors import InfeasibleError
from vcodec.rate import (
    ablation_report,
    allocate_bits,
    search_qp_for_bits,
    search_qp_for_mse,
    write_reports_csv,
    write_reports_json,
)
from vcodec.tensor import Tensor, gen_synthetic


def constant_tensor(rows=256, cols=256, value=1.0):
    return Tensor((rows, cols), 0, "weight", np.full(rows * cols, value, dtype=np.float32))


class TestMseSearch:
    def test_constant_tensor_max_qp(self):
        rep = search_qp_for_mse(constant_tensor(), 0.01)
        assert rep.qp == 51
        assert rep.bits_per_value < 0.2
        assert rep.mse <= 0.01
        assert not rep.floor

    def test_corpus_tensor_meets_target(self):
        t = gen_synthetic(256, 256, 0.9, 0.005, 20, seed=1)
        rep = search_qp_for_mse(t, 0.01)
        assert rep.mse <= 0.01
        assert rep.bits_per_value < 8.0
        assert rep.bits_per_value == pytest.approx(8 * rep.bytes / t.element_count)

    def test_floor_flag_when_target_unreachable(self):
        t = gen_synthetic(64, 64, 0.5, 0.0, 1.0, seed=2)
        rep = search_qp_for_mse(t, 1e-12)
        assert rep.floor
        assert rep.qp == 0
        assert rep.mse > 1e-12  # reported honestly

    def test_reproducible(self):
        t = gen_synthetic(128, 128, 0.8, 0.01, 10, seed=3)
        a = search_qp_for_mse(t, 0.01)
        b = search_qp_for_mse(t, 0.01)
        assert a == b


class TestBitsSearch:
    def test_hits_target_within_ten_percent(self):
        t = gen_synthetic(256, 256, 0.9, 0.005, 20, seed=4)
        rep = search_qp_for_bits(t, 3.5)
        assert rep.bits_per_value == pytest.approx(3.5, rel=0.10)

    def test_infeasible_target(self):
        with pytest.raises(InfeasibleError):
            search_qp_for_bits(constant_tensor(), 0.05)


class TestAblation:
    def test_baseline_row_exactly_eight(self):
        t = gen_synthetic(128, 128, 0.9, 0.0, 1.0, seed=5)
        rows = ablation_report(t, 0.01)
        assert rows[0].stage_set == "baseline"
        assert rows[0].bits_per_value == 8.0
        assert rows[0].bytes == t.element_count
        assert len(rows) == 4
        assert [r.stage_set for r in rows] == [
            "baseline",
            "entropy",
            "entropy+transform",
            "entropy+transform+prediction",
        ]

    def test_all_zero_tensor_tiny_rows(self):
        t = Tensor((512, 512), 0, "weight", np.zeros(512 * 512, dtype=np.float32))
        rows = ablation_report(t, 0.01)
        for r in rows[1:]:
            assert r.bits_per_value < 0.1
            assert r.mse == 0.0


class TestAllocation:
    def test_single_tensor_equals_uniform_target(self):
        t = gen_synthetic(128, 128, 0.9, 0.0, 1.0, seed=6)
        plan = allocate_bits([t], 3.0)
        assert plan.targets[0] == pytest.approx(3.0)
        assert plan.global_average == pytest.approx(3.0)

    def test_constant_tensor_gets_fewer_bits(self):
        hard = gen_synthetic(128, 128, 0.0, 0.0, 1.0, seed=7)
        easy = constant_tensor(128, 128)
        plan = allocate_bits([easy, hard], 3.0)
        assert plan.targets[0] < plan.targets[1]
        assert plan.global_average == pytest.approx(3.0, abs=0.01)

    def test_never_worse_than_uniform(self):
        a = gen_synthetic(128, 128, 0.0, 0.0, 1.0, seed=8)
        b = gen_synthetic(128, 128, 0.95, 0.0, 1.0, seed=9)
        plan = allocate_bits([a, b], 3.0)
        assert plan.total_weighted_mse <= plan.uniform_weighted_mse + 1e-9

    def test_infeasible_targets(self):
        t = constant_tensor(64, 64)
        with pytest.raises(InfeasibleError):
            allocate_bits([t], 0.05)
        with pytest.raises(InfeasibleError):
            allocate_bits([t], 9.0)


class TestReportFiles:
    def test_csv_columns_and_metadata(self, tmp_path):
        t = gen_synthetic(64, 64, 0.5, 0.0, 1.0, seed=10)
        rep = search_qp_for_mse(t, 0.05, config=CodecConfig(), tensor_id="alpha")
        path = tmp_path / "r.csv"
        write_reports_csv([rep], path, command="vcodec sweep --in x.vctn")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# vcodec 0.1.0 | vcodec sweep")
        reader = csv.DictReader(lines[1:])
        assert reader.fieldnames == ["tensor_id", "stage_set", "qp", "bits_per_value", "mse", "bytes"]
        row = next(reader)
        assert row["tensor_id"] == "alpha"

    def test_json_shape(self, tmp_path):
        t = gen_synthetic(64, 64, 0.5, 0.0, 1.0, seed=11)
        rep = search_qp_for_mse(t, 0.05)
        path = tmp_path / "r.json"
        write_reports_json([rep], path, command="cmd")
        doc = json.loads(path.read_text())
        assert doc["meta"]["version"] == "0.1.0"
        assert set(doc["reports"][0]) == {"tensor_id", "stage_set", "qp", "bits_per_value", "mse", "bytes"}
