"""Analytical energy and speedup model for compression-enabled communication.

Energy-per-bit presets cover end-to-end NCCL transfers and hardware codec
implementations (video codecs and their tensor-codec reductions); the time
model is bandwidth-only. Speedup can never exceed the compression ratio,
and the model will happily show compression as a net loss when codec
throughput is the bottleneck.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from . import __version__
from .errors import InfeasibleError


@dataclass(frozen=True)
class CodecHWProfile:
    name: str
    power_w: float | None
    area_mm2: float | None
    energy_pj_per_bit: float
    throughput_mb_s: float | None = None

    def __post_init__(self):
        if self.energy_pj_per_bit < 0:
            raise ValueError("energy must be >= 0")


# Synthesized 100 Gbit/s implementations: throughput 12.5e3 MB/s by construction.
_SYNTH_MB_S = 12_500.0

PROFILES = {
    "nccl": CodecHWProfile("NCCL End to End", None, None, 5120.0),
    "h264_enc": CodecHWProfile("H.264 Enc (100Gbps)", 1.1, 0.96, 167.8, _SYNTH_MB_S),
    "h264_dec": CodecHWProfile("H.264 Dec (100Gbps)", 1.0, 0.97, 154.3, _SYNTH_MB_S),
    "h265_enc": CodecHWProfile("H.265 Enc (100Gbps)", 11.0, 11.7, 1707.5, _SYNTH_MB_S),
    "h265_dec": CodecHWProfile("H.265 Dec (100Gbps)", 4.3, 2.1, 665.4, _SYNTH_MB_S),
    "t264_enc": CodecHWProfile("T.264 Enc (100Gbps)", 0.6, 0.6, 97.8, _SYNTH_MB_S),
    "t264_dec": CodecHWProfile("T.264 Dec (100Gbps)", 0.4, 0.4, 63.5, _SYNTH_MB_S),
    "t265_enc": CodecHWProfile("T.265 Enc (100Gbps)", 2.3, 2.4, 352.9, _SYNTH_MB_S),
    "t265_dec": CodecHWProfile("T.265 Dec (100Gbps)", 0.9, 0.5, 144.4, _SYNTH_MB_S),
    # GPU engines: H.265-class energy at streaming-grade throughput.
    "nvenc": CodecHWProfile("NVENC", None, None, 1707.5, 900.0),
    "nvdec": CodecHWProfile("NVDEC", None, None, 665.4, 1100.0),
}

CODEC_PAIRS = {
    "h264": ("h264_enc", "h264_dec"),
    "h265": ("h265_enc", "h265_dec"),
    "t264": ("t264_enc", "t264_dec"),
    "t265": ("t265_enc", "t265_dec"),
    "nvenc": ("nvenc", "nvdec"),
}


def profile_to_text(p: CodecHWProfile) -> str:
    lines = [f"name = {p.name}"]
    for key in ("power_w", "area_mm2", "energy_pj_per_bit", "throughput_mb_s"):
        v = getattr(p, key)
        if v is not None:
            lines.append(f"{key} = {v!r}")
    return "\n".join(lines) + "\n"


def profile_from_text(text: str) -> CodecHWProfile:
    fields: dict = {"power_w": None, "area_mm2": None, "throughput_mb_s": None}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "name":
            fields["name"] = val
        elif key in ("power_w", "area_mm2", "energy_pj_per_bit", "throughput_mb_s"):
            fields[key] = float(val)
        else:
            raise ValueError(f"unknown profile field {key!r}")
    if "name" not in fields or "energy_pj_per_bit" not in fields:
        raise ValueError("profile needs at least name and energy_pj_per_bit")
    return CodecHWProfile(**fields)


def energy_efficiency(comm_pj: float, enc_pj: float, dec_pj: float, r: float) -> float:
    """Energy factor of compressed vs raw transfer: comm / (comm/r + enc + dec)."""
    if r < 1:
        raise ValueError(f"compression ratio {r} must be >= 1")
    return comm_pj / (comm_pj / r + enc_pj + dec_pj)


def codec_comm_ratio(comm_pj: float, enc_pj: float, dec_pj: float) -> float:
    """How much cheaper one coded bit is than one transmitted bit."""
    return comm_pj / (enc_pj + dec_pj)


@dataclass(frozen=True)
class TrainingScenario:
    model_bytes: float
    step_comm_bytes: float
    bandwidth_gbit_s: float
    compute_time_s: float
    ratio: float
    enc: CodecHWProfile
    dec: CodecHWProfile

    def __post_init__(self):
        if self.ratio < 1:
            raise ValueError("compression ratio must be >= 1")
        if self.bandwidth_gbit_s <= 0:
            raise ValueError("bandwidth must be positive")


def step_time(s: TrainingScenario, compressed: bool) -> float:
    """Seconds per step; communication overlaps compute, codecs do not."""
    link_bytes_s = s.bandwidth_gbit_s * 1e9 / 8
    if not compressed:
        return max(s.compute_time_s, s.step_comm_bytes / link_bytes_s)
    for profile in (s.enc, s.dec):
        if not profile.throughput_mb_s or profile.throughput_mb_s <= 0:
            raise ValueError(f"{profile.name} has no throughput; cannot compress with it")
    enc_bytes_s = s.enc.throughput_mb_s * 1e6
    dec_bytes_s = s.dec.throughput_mb_s * 1e6
    wire = s.step_comm_bytes / (s.ratio * link_bytes_s)
    enc_t = s.step_comm_bytes / enc_bytes_s
    dec_t = s.step_comm_bytes / (s.ratio * dec_bytes_s)
    return max(s.compute_time_s, wire + enc_t + dec_t)


def speedup(s: TrainingScenario) -> float:
    return step_time(s, compressed=False) / step_time(s, compressed=True)


def infer_parallel_plan(
    model_bytes: float,
    gpu_memory_bytes: float,
    device_count: int,
    activation_fraction: float = 0.5,
) -> tuple:
    """(pipeline_stages, dp_degree) minimizing modeled per-step communication.

    Feasible plans split devices as pp * dp == device_count with the model
    share fitting memory. Per-step volume: pipeline boundaries move
    activations both ways (approximated as activation_fraction of the model
    per boundary); data parallelism ring-allreduces the gradients. Ties go
    to fewer pipeline stages.
    """
    if model_bytes <= 0 or gpu_memory_bytes <= 0 or device_count < 1:
        raise ValueError("model bytes, memory, and device count must be positive")
    candidates = []
    for pp in range(1, device_count + 1):
        if device_count % pp != 0:
            continue
        if model_bytes / pp > gpu_memory_bytes:
            continue
        dp = device_count // pp
        act_volume = 2 * (pp - 1) * activation_fraction * model_bytes
        grad_volume = 2 * model_bytes * (dp - 1) / dp
        candidates.append((act_volume + grad_volume, pp, dp))
    if not candidates:
        raise InfeasibleError(
            f"no (pp, dp) split of {device_count} devices fits "
            f"{model_bytes:.3g} bytes into {gpu_memory_bytes:.3g}-byte GPUs"
        )
    candidates.sort(key=lambda c: (c[0], c[1]))
    _, pp, dp = candidates[0]
    return pp, dp


def sweep_bandwidth(s: TrainingScenario, bandwidths_gbit_s) -> list:
    """Speedup-vs-bandwidth table (one row per bandwidth)."""
    rows = []
    for bw in bandwidths_gbit_s:
        scn = TrainingScenario(
            s.model_bytes, s.step_comm_bytes, bw, s.compute_time_s, s.ratio, s.enc, s.dec
        )
        rows.append(
            {
                "bandwidth_gbit_s": bw,
                "uncompressed_s": step_time(scn, False),
                "compressed_s": step_time(scn, True),
                "speedup": speedup(scn),
            }
        )
    return rows


def sweep_model_size(comm_pj: float, enc_pj: float, dec_pj: float, r: float, model_bytes_list) -> list:
    """Energy-factor table vs model size (per-step energy in joules)."""
    rows = []
    for mb in model_bytes_list:
        bits = 8.0 * mb
        raw_j = bits * comm_pj * 1e-12
        comp_j = bits * (comm_pj / r + enc_pj + dec_pj) * 1e-12
        rows.append(
            {
                "model_bytes": mb,
                "uncompressed_j": raw_j,
                "compressed_j": comp_j,
                "energy_factor": energy_efficiency(comm_pj, enc_pj, dec_pj, r),
            }
        )
    return rows


def write_sweep_csv(rows: list, path, command: str = "") -> None:
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="") as fh:
        fh.write(f"# vcodec {__version__} | {command}\n")
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
