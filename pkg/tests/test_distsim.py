import json

import numpy as np
import pytest

from vcodec.distsim import (
    EDGE_4X8GB,
    EDGE_PLAN,
    LLAMA3_70B_128K,
    ClusterSpec,
    ModelSpec,
    ParallelPlan,
    Scenario,
    check_fit,
    comm_report,
    load_scenario,
    memory_footprint,
    parse_scenario_text,
    scenario_to_text,
    simulate_dp_allreduce,
    simulate_pipeline,
    trace_summary,
    write_trace_csv,
)
from vcodec.pipelines import GradientSchedule
from vcodec.tensor import Tensor, gen_synthetic, gen_synthetic_kv


def act_stream(n, seed0=0, tokens=128, hidden=128):
    return [
        gen_synthetic_kv(tokens, hidden, 0.9, 0.03, 20, seed=seed0 + i, role="activation")
        for i in range(n)
    ]


class TestMemory:
    def test_published_kv_fp16_40gb(self):
        p = ParallelPlan(pipeline_stages=1, kv_bits=16.0)
        fp = memory_footprint(LLAMA3_70B_128K, p)
        assert fp["kv_gb"] == pytest.approx(40.0, abs=0.1)

    def test_published_weights_6_3gb(self):
        fp = memory_footprint(LLAMA3_70B_128K, EDGE_PLAN)
        assert fp["weights_gb"] == pytest.approx(6.3, abs=0.1)

    def test_published_kv_1_8gb(self):
        fp = memory_footprint(LLAMA3_70B_128K, EDGE_PLAN)
        assert fp["kv_gb"] == pytest.approx(1.8, abs=0.1)

    def test_edge_config_feasible_fp16_not(self):
        assert check_fit(LLAMA3_70B_128K, EDGE_PLAN, EDGE_4X8GB, slack_gb=0.5)
        fp16_plan = ParallelPlan(pipeline_stages=4, data_parallel_degree=1)
        assert not check_fit(LLAMA3_70B_128K, fp16_plan, EDGE_4X8GB, slack_gb=0.5)

    def test_plan_cluster_mismatch(self):
        with pytest.raises(ValueError):
            memory_footprint(LLAMA3_70B_128K, ParallelPlan(pipeline_stages=3), EDGE_4X8GB)

    def test_positive_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(0, 80, 8192, 1, 1)
        with pytest.raises(ValueError):
            ClusterSpec(4, -1, 10)


class TestCommReport:
    def test_ratio_activation_3_5(self):
        rep = comm_report(LLAMA3_70B_128K, EDGE_PLAN)
        assert rep["ratio_vs_fp16"] == pytest.approx(16 / 3.5)

    def test_ratio_fp16_is_one(self):
        p = ParallelPlan(pipeline_stages=4, activation_bits=16.0)
        assert comm_report(LLAMA3_70B_128K, p)["ratio_vs_fp16"] == 1.0

    def test_bytes_per_boundary_per_token(self):
        rep = comm_report(LLAMA3_70B_128K, EDGE_PLAN)
        assert rep["bytes_per_boundary_per_token"] == pytest.approx(8192 * 3.5 / 8)


class TestPipelineSim:
    def test_zero_boundaries_zero_mse(self):
        trace = simulate_pipeline(act_stream(2), ParallelPlan(pipeline_stages=1, activation_bits=3.5))
        assert trace.cumulative_mse == ()
        assert trace.fidelity == 0.0

    def test_mse_non_decreasing_in_boundaries(self):
        stream = act_stream(3)
        trace = simulate_pipeline(stream, ParallelPlan(pipeline_stages=4, activation_bits=3.5))
        mses = trace.cumulative_mse
        assert len(mses) == 3
        assert mses[0] <= mses[1] + 1e-12
        assert mses[1] <= mses[2] + 1e-12

    def test_codec_beats_rtn_baseline(self):
        stream = act_stream(3)
        codec = simulate_pipeline(stream, ParallelPlan(pipeline_stages=4, activation_bits=3.5), "codec")
        rtn = simulate_pipeline(stream, ParallelPlan(pipeline_stages=4, activation_bits=3.5), "rtn", rtn_bits=4)
        assert codec.cumulative_mse[-1] < rtn.cumulative_mse[-1]

    def test_trace_rows_shape(self, tmp_path):
        trace = simulate_pipeline(act_stream(2), ParallelPlan(pipeline_stages=3, activation_bits=4.0))
        assert len(trace.rows) == 2 * 2
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path, command="test")
        lines = path.read_text().splitlines()
        assert lines[1] == "boundary_id,step,bytes,mse"
        assert len(lines) == 2 + len(trace.rows)
        summary = trace_summary(trace)
        assert set(summary) == {
            "boundary_volumes_bytes",
            "cumulative_mse",
            "fidelity_rel_frobenius",
            "bits_per_value",
        }


class TestAllReduce:
    def shards(self, n=4, seed0=0, rows=96, cols=96):
        return [
            gen_synthetic(rows, cols, 0.5, 0.005, 10, seed=seed0 + i, role="weight_gradient")
            for i in range(n)
        ]

    def test_zero_shards_exact(self):
        zeros = [
            Tensor((32, 32), 0, "weight_gradient", np.zeros(1024, dtype=np.float32))
            for _ in range(3)
        ]
        res = simulate_dp_allreduce(zeros, 2.6)
        assert res.mse_vs_exact == 0.0

    def test_more_bits_less_error(self):
        shards = self.shards()
        hi = simulate_dp_allreduce(shards, 2.6)
        lo = simulate_dp_allreduce(shards, 0.8)
        assert hi.rel_error_vs_exact < lo.rel_error_vs_exact

    def test_order_invariance(self):
        shards = self.shards()
        a = simulate_dp_allreduce(shards, 2.6)
        b = simulate_dp_allreduce(list(reversed(shards)), 2.6)
        assert np.max(np.abs(a.reduced.values - b.reduced.values)) < 1e-5

    def test_schedule_compressor(self):
        shards = self.shards(n=2, rows=64, cols=64)
        res = simulate_dp_allreduce(shards, GradientSchedule(), step=100)
        assert res.rel_error_vs_exact < 0.2
        assert res.bits_per_value == pytest.approx(7.0, rel=0.25)

    def test_shape_mismatch(self):
        a = gen_synthetic(16, 16, 0.5, 0, 1, seed=0, role="weight_gradient")
        b = gen_synthetic(16, 8, 0.5, 0, 1, seed=1, role="weight_gradient")
        with pytest.raises(ValueError):
            simulate_dp_allreduce([a, b], 2.6)


class TestScenarioFiles:
    def test_roundtrip(self, tmp_path):
        s = Scenario(LLAMA3_70B_128K, EDGE_4X8GB, EDGE_PLAN)
        text = scenario_to_text(s)
        back = parse_scenario_text(text)
        assert back.model == s.model
        assert back.cluster == s.cluster
        assert back.plan == s.plan
        path = tmp_path / "edge.scn"
        path.write_text(text)
        assert load_scenario(path) == back

    def test_comments_and_errors(self):
        text = scenario_to_text(Scenario(LLAMA3_70B_128K, EDGE_4X8GB, EDGE_PLAN))
        assert parse_scenario_text("# hello\n" + text) is not None
        with pytest.raises(ValueError):
            parse_scenario_text("model.parameter_count 70e9")
        with pytest.raises(ValueError):
            parse_scenario_text("model.parameter_count = 70e9")
