"""Deterministic accounting for distributed inference and training:
per-device memory, boundary communication volumes, error propagation across
pipeline stages, and compressed all-reduce semantics.

Stage computation is the identity: the simulator measures what compression
does to tensors and bytes, not model quality. GB means 10^9 bytes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .codec import CodecConfig
from .pipelines import (
    GradientSchedule,
    _compress_tensor,
    baseline_rtn_runtime,
    compress_gradient,
    compress_runtime,
    decompress,
    decompress_gradient,
)
from .quant import rtn_dequantize
from .tensor import Tensor

GB = 1e9


@dataclass(frozen=True)
class ModelSpec:
    parameter_count: float
    layer_count: int
    hidden_size: int
    kv_bytes_per_token_fp16: float
    max_sequence_length: int

    def __post_init__(self):
        for name in ("parameter_count", "layer_count", "hidden_size", "kv_bytes_per_token_fp16", "max_sequence_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ClusterSpec:
    device_count: int
    memory_per_device_gb: float
    link_bandwidth_gbit_s: float

    def __post_init__(self):
        for name in ("device_count", "memory_per_device_gb", "link_bandwidth_gbit_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ParallelPlan:
    pipeline_stages: int
    data_parallel_degree: int = 1
    weight_bits: float = 16.0
    kv_bits: float = 16.0
    activation_bits: float = 16.0
    gradient_schedule: GradientSchedule | None = None

    def __post_init__(self):
        if self.pipeline_stages < 1 or self.data_parallel_degree < 1:
            raise ValueError("parallel degrees must be >= 1")
        for name in ("weight_bits", "kv_bits", "activation_bits"):
            if not 0 < getattr(self, name) <= 16:
                raise ValueError(f"{name} must lie in (0, 16]")


# The published setting: a 70B model with a 128k context on 4 x 8 GB devices.
# kv_bytes_per_token is calibrated so the fp16 128k cache is the stated 40 GB.
LLAMA3_70B_128K = ModelSpec(
    parameter_count=70e9,
    layer_count=80,
    hidden_size=8192,
    kv_bytes_per_token_fp16=40 * GB / 131072,
    max_sequence_length=131072,
)
EDGE_4X8GB = ClusterSpec(device_count=4, memory_per_device_gb=8.0, link_bandwidth_gbit_s=10.0)
EDGE_PLAN = ParallelPlan(pipeline_stages=4, data_parallel_degree=1, weight_bits=2.88, kv_bits=2.9, activation_bits=3.5)


def validate_plan(p: ParallelPlan, cluster: ClusterSpec) -> None:
    if p.pipeline_stages * p.data_parallel_degree != cluster.device_count:
        raise ValueError(
            f"plan {p.pipeline_stages}x{p.data_parallel_degree} does not cover "
            f"{cluster.device_count} devices"
        )


def memory_footprint(m: ModelSpec, p: ParallelPlan, cluster: ClusterSpec | None = None) -> dict:
    """Per-device memory in GB: weights + full-context KV, split over stages."""
    if cluster is not None:
        validate_plan(p, cluster)
    weights_gb = m.parameter_count * p.weight_bits / 8 / p.pipeline_stages / GB
    kv_gb = (
        m.kv_bytes_per_token_fp16
        * m.max_sequence_length
        * (p.kv_bits / 16.0)
        / p.pipeline_stages
        / GB
    )
    return {"weights_gb": weights_gb, "kv_gb": kv_gb, "total_gb": weights_gb + kv_gb}


def check_fit(m: ModelSpec, p: ParallelPlan, cluster: ClusterSpec, slack_gb: float = 0.5) -> bool:
    """Whether the per-device footprint fits device memory plus slack."""
    validate_plan(p, cluster)
    total = memory_footprint(m, p)["total_gb"]
    return total <= cluster.memory_per_device_gb + slack_gb


def comm_report(m: ModelSpec, p: ParallelPlan) -> dict:
    """Per-token boundary payload and the compression ratio against fp16."""
    bytes_per_boundary_per_token = m.hidden_size * p.activation_bits / 8.0
    return {
        "bytes_per_boundary_per_token": bytes_per_boundary_per_token,
        "ratio_vs_fp16": 16.0 / p.activation_bits,
        "boundaries": p.pipeline_stages - 1,
    }


@dataclass(frozen=True, eq=False)
class StageTrace:
    """Per-boundary volumes and error accumulation for one simulated stream."""

    rows: tuple  # (boundary_id, step, bytes, mse) per tensor per boundary
    boundary_volumes: tuple  # total bytes per boundary
    cumulative_mse: tuple  # corpus-mean MSE after 1..n boundaries
    fidelity: float  # corpus-mean relative Frobenius error after the last boundary
    bits_per_value: float


def simulate_pipeline(
    tensor_stream,
    p: ParallelPlan,
    compressor: str = "codec",
    rtn_bits: int = 4,
    config: CodecConfig | None = None,
) -> StageTrace:
    """Push activations through stage boundaries, compressing at each one.

    Stage computation is the identity, so the trace isolates compression
    error; with zero boundaries the cumulative MSE is exactly zero.
    """
    if compressor not in ("codec", "rtn"):
        raise ValueError(f"unknown compressor {compressor!r}")
    boundaries = p.pipeline_stages - 1
    rows = []
    volumes = [0] * boundaries
    n_tensors = 0
    sum_mse = [0.0] * boundaries
    sum_rel = 0.0
    total_bits = 0.0
    for step, t in enumerate(tensor_stream):
        n_tensors += 1
        original = t.values.astype(np.float64)
        x = t
        for b in range(boundaries):
            if compressor == "codec":
                ct = compress_runtime(x, p.activation_bits, config=config)
                nbytes = ct.nbytes
                x = decompress(ct)
            else:
                q, rep = baseline_rtn_runtime(x, rtn_bits)
                nbytes = rep.bytes
                x = rtn_dequantize(q)
            mse = float(np.mean((x.values.astype(np.float64) - original) ** 2))
            rows.append((b, step, nbytes, mse))
            volumes[b] += nbytes
            sum_mse[b] += mse
            total_bits += 8.0 * nbytes / t.element_count
        err = x.values.astype(np.float64) - original
        ref = max(float(np.linalg.norm(original)), 1e-12)
        sum_rel += float(np.linalg.norm(err)) / ref
    if n_tensors == 0:
        return StageTrace((), tuple(volumes), (), 0.0, 0.0)
    return StageTrace(
        tuple(rows),
        tuple(volumes),
        tuple(s / n_tensors for s in sum_mse),
        sum_rel / n_tensors,
        total_bits / max(1, n_tensors * boundaries),
    )


@dataclass(frozen=True, eq=False)
class AllReduceResult:
    reduced: Tensor
    bits_per_value: float
    mse_vs_exact: float
    rel_error_vs_exact: float
    transmitted_bytes: int


def simulate_dp_allreduce(shards, compressor, step: int = 0, config: CodecConfig | None = None) -> AllReduceResult:
    """Compressed all-reduce: decompress each shard, sum canonically,
    recompress for broadcast, decompress at receivers.

    `compressor` is either a bits-per-value float (single codec pass) or a
    GradientSchedule (residual-compensated pair). Error is measured against
    the exact float64 sum of the uncompressed shards.
    """
    shards = list(shards)
    if not shards:
        raise ValueError("all-reduce needs at least one shard")
    dims = shards[0].dims
    for s in shards:
        if s.dims != dims:
            raise ValueError(f"shard shape mismatch: {s.dims} vs {dims}")

    def send(t: Tensor):
        if isinstance(compressor, GradientSchedule):
            payload = compress_gradient(t, step, compressor, config=config)
            nbytes = payload.base.nbytes + payload.residual.nbytes
            return decompress_gradient(payload), nbytes
        ct = _compress_tensor(t, target_bits=float(compressor), config=config)
        return decompress(ct), ct.nbytes

    total_bytes = 0
    received = []
    for s in shards:
        rec, nbytes = send(s)
        total_bytes += nbytes
        received.append(rec.values.astype(np.float64))
    # Canonical ascending-index summation in float64: permutation-stable.
    summed = np.sum(np.stack(received, axis=0), axis=0)
    partial = Tensor(dims, shards[0].channel_axis, shards[0].role, summed.astype(np.float32))
    reduced, bcast_bytes = send(partial)
    total_bytes += bcast_bytes

    exact = np.sum(
        np.stack([s.values.astype(np.float64) for s in shards], axis=0), axis=0
    )
    err = reduced.values.astype(np.float64) - exact
    mse = float(np.mean(err**2))
    rel = float(np.linalg.norm(err)) / max(float(np.linalg.norm(exact)), 1e-12)
    n_payloads = len(shards) + 1
    bits = 8.0 * total_bytes / (n_payloads * reduced.element_count)
    return AllReduceResult(reduced, bits, mse, rel, total_bytes)


# Scenario files: flat "section.key = value" lines, '#' comments.

_MODEL_KEYS = ("parameter_count", "layer_count", "hidden_size", "kv_bytes_per_token_fp16", "max_sequence_length")
_CLUSTER_KEYS = ("device_count", "memory_per_device_gb", "link_bandwidth_gbit_s")
_PLAN_KEYS = ("pipeline_stages", "data_parallel_degree", "weight_bits", "kv_bits", "activation_bits")
_INT_KEYS = {
    "layer_count",
    "hidden_size",
    "max_sequence_length",
    "device_count",
    "pipeline_stages",
    "data_parallel_degree",
}


@dataclass(frozen=True)
class Scenario:
    model: ModelSpec
    cluster: ClusterSpec
    plan: ParallelPlan


def parse_scenario_text(text: str) -> Scenario:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"scenario line {lineno}: expected 'section.key = value'")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()

    def section(prefix, keys):
        out = {}
        for k in keys:
            full = f"{prefix}.{k}"
            if full not in values:
                raise ValueError(f"scenario is missing {full}")
            raw = values[full]
            out[k] = int(float(raw)) if k in _INT_KEYS else float(raw)
        return out

    return Scenario(
        ModelSpec(**section("model", _MODEL_KEYS)),
        ClusterSpec(**section("cluster", _CLUSTER_KEYS)),
        ParallelPlan(**section("plan", _PLAN_KEYS)),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario_text(fh.read())


def scenario_to_text(s: Scenario) -> str:
    lines = []
    for prefix, obj, keys in (
        ("model", s.model, _MODEL_KEYS),
        ("cluster", s.cluster, _CLUSTER_KEYS),
        ("plan", s.plan, _PLAN_KEYS),
    ):
        for k in keys:
            v = getattr(obj, k)
            lines.append(f"{prefix}.{k} = {v!r}" if isinstance(v, float) else f"{prefix}.{k} = {v}")
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: StageTrace, path, command: str = "") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# vcodec {__version__} | {command}\n")
        writer = csv.writer(fh)
        writer.writerow(["boundary_id", "step", "bytes", "mse"])
        for row in trace.rows:
            writer.writerow([row[0], row[1], row[2], f"{row[3]:.10g}"])


def trace_summary(trace: StageTrace) -> dict:
    return {
        "boundary_volumes_bytes": list(trace.boundary_volumes),
        "cumulative_mse": [float(f"{m:.10g}") for m in trace.cumulative_mse],
        "fidelity_rel_frobenius": float(f"{trace.fidelity:.10g}"),
        "bits_per_value": float(f"{trace.bits_per_value:.6f}"),
    }


def write_trace_json(trace: StageTrace, path, command: str = "") -> None:
    doc = {
        "meta": {"tool": "vcodec", "version": __version__, "command": command},
        "summary": trace_summary(trace),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
