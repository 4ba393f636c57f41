"""Application compressors: two-stage weight compression with optional
incoherence rotation, one-shot runtime compression for KV-cache and
activations, and residual-compensated gradient compression.

Every compressor is data-independent: nothing is calibrated, and
compressing one tensor never reads another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import CodecConfig, decode_container
from .codec.bitstream import GradientExt, RotationExt
from .errors import InfeasibleError
from .quant import QuantScheme, QuantizedPlane, dequantize_plane, quantize_plane
from .rate import RateReport, _RD, _search_bits_qp, _search_mse_qp
from .rotation import make_rotation, next_supported_size
from .tensor import Tensor, metrics_from_arrays, tensor_from_plane

RUNTIME_ROLES = ("activation", "kv_cache")
GRADIENT_ROLES = ("weight_gradient", "activation_gradient")

_COL_SEED_OFFSET = 1  # column rotation uses seed + 1; only the base seed is stored


@dataclass(frozen=True, eq=False)
class CompressedTensor:
    """A compressed tensor: self-describing bitstream plus a rate report."""

    data: bytes
    dims: tuple
    role: str
    rotation_seed: int | None
    report: RateReport

    @property
    def nbytes(self) -> int:
        return len(self.data)


def _view_shape(dims, channel_axis):
    if len(dims) == 2:
        return dims
    chan = dims[channel_axis]
    other = 1
    for i, d in enumerate(dims):
        if i != channel_axis:
            other *= d
    return (other, chan)


def _plane_scheme(t: Tensor) -> QuantScheme:
    """Channel-wise 8-bit stage-1: symmetric for weights (zero-centered),
    asymmetric min-max for runtime and gradient tensors (dynamic ranges)."""
    mode = "symmetric_rtn" if t.role == "weight" else "asymmetric_minmax"
    return QuantScheme(mode, 8, "per_channel", axis=t.plane_axis())


def _compress_tensor(
    t: Tensor,
    *,
    target_mse=None,
    target_bits=None,
    fixed_qp=None,
    rotate=False,
    rotation_seed=0,
    config=None,
    frame_side=1024,
    ext=None,
) -> CompressedTensor:
    if sum(x is not None for x in (target_mse, target_bits, fixed_qp)) != 1:
        raise ValueError("exactly one of target_mse / target_bits / fixed_qp is required")
    cfg = config or CodecConfig()
    plane = t.plane().astype(np.float64)
    work = plane
    if rotate:
        rows, cols = plane.shape
        pr_n = next_supported_size(rows)
        pc_n = next_supported_size(cols)
        if (pr_n, pc_n) != (rows, cols):
            padded = np.zeros((pr_n, pc_n), dtype=np.float64)
            padded[:rows, :cols] = plane
            work = padded
        pr = make_rotation(pr_n, rotation_seed)
        pc = make_rotation(pc_n, rotation_seed + _COL_SEED_OFFSET)
        work = pc.right_apply(pr.left_t_apply(work))
        ext = RotationExt(rotation_seed, True, True)
    q = quantize_plane(work, _plane_scheme(t))
    q = QuantizedPlane(q.codes, q.scales, q.zero_points, q.scheme, t.dims, t.channel_axis, t.role)
    rd = _RD(q, work, t.element_count, cfg, frame_side, ext=ext)
    if target_mse is not None:
        qp, floor = _search_mse_qp(rd, target_mse)
    elif target_bits is not None:
        if target_bits < 0.1:
            raise InfeasibleError(f"bits target {target_bits} below 0.1 bits/value")
        qp, floor = _search_bits_qp(rd, target_bits), False
    else:
        qp, floor = fixed_qp, False
    data, _ = rd.eval(qp)
    ct = CompressedTensor(data, t.dims, t.role, rotation_seed if rotate else None, None)
    decoded = decompress(ct)
    true_mse = float(np.mean((decoded.values.astype(np.float64) - t.values) ** 2))
    report = RateReport(
        "t0",
        "+".join(cfg.stage_set()) or "none",
        qp,
        8.0 * len(data) / t.element_count,
        true_mse,
        len(data),
        floor,
    )
    return CompressedTensor(data, t.dims, t.role, ct.rotation_seed, report)


def compress_weights(
    t: Tensor,
    *,
    target_mse: float | None = None,
    target_bits: float | None = None,
    rotate: bool = False,
    rotation_seed: int = 0,
    config: CodecConfig | None = None,
    frame_side: int = 1024,
) -> CompressedTensor:
    """Two-stage weight compression: optional rotation, channel-wise 8-bit
    RTN, then the intra codec at a searched qp."""
    if t.role != "weight":
        raise ValueError(f"compress_weights expects a weight tensor, got {t.role}")
    return _compress_tensor(
        t,
        target_mse=target_mse,
        target_bits=target_bits,
        rotate=rotate,
        rotation_seed=rotation_seed,
        config=config,
        frame_side=frame_side,
    )


def compress_runtime(
    t: Tensor,
    target_bits: float,
    config: CodecConfig | None = None,
    frame_side: int = 1024,
) -> CompressedTensor:
    """One-shot compression for runtime tensors; no rotation, no calibration."""
    if t.role not in RUNTIME_ROLES:
        raise ValueError(f"compress_runtime expects {RUNTIME_ROLES}, got {t.role}")
    return _compress_tensor(t, target_bits=target_bits, config=config, frame_side=frame_side)


def decompress(ct) -> Tensor:
    """Invert every stage: codec decode, dequantize, unrotate, unpad, reshape."""
    data = ct.data if isinstance(ct, CompressedTensor) else bytes(ct)
    q, bs = decode_container(data)
    plane = dequantize_plane(q).astype(np.float64)
    if isinstance(bs.ext, RotationExt):
        rows, cols = bs.plane_shape
        if bs.ext.cols_rotated:
            plane = make_rotation(cols, bs.ext.seed + _COL_SEED_OFFSET).right_invert(plane)
        if bs.ext.rows_rotated:
            plane = make_rotation(rows, bs.ext.seed).left_t_invert(plane)
        vr, vc = _view_shape(bs.dims, bs.channel_axis)
        plane = plane[:vr, :vc]
    return tensor_from_plane(plane.astype(np.float32), bs.dims, bs.channel_axis, bs.role)


def baseline_rtn_runtime(t: Tensor, bits: int):
    """Direct per-channel asymmetric min-max quantization comparison arm."""
    if t.role not in RUNTIME_ROLES + GRADIENT_ROLES:
        raise ValueError(f"baseline expects a runtime or gradient tensor, got {t.role}")
    if not 2 <= int(bits) <= 8:
        raise ValueError(f"bits {bits} outside [2, 8]")
    scheme = QuantScheme("asymmetric_minmax", int(bits), "per_channel", axis=t.plane_axis())
    plane = t.plane().astype(np.float64)
    q = quantize_plane(plane, scheme)
    q = QuantizedPlane(q.codes, q.scales, q.zero_points, scheme, t.dims, t.channel_axis, t.role)
    rec = dequantize_plane(q).astype(np.float64)
    mse = float(np.mean((rec - plane) ** 2))
    packed_bytes = (t.element_count * int(bits) + 7) // 8 + 8 * q.scales.size
    report = RateReport("t0", "rtn", None, float(bits), mse, packed_bytes)
    return q, report


def compression_ratio(bits_per_value: float, source_bits: float = 16.0) -> float:
    return source_bits / bits_per_value


def format_ratio(bits_per_value: float, source_bits: float = 16.0) -> str:
    """One-decimal display, truncated (5.52 -> "5.5x", 4.57 -> "4.5x")."""
    r = compression_ratio(bits_per_value, source_bits)
    return f"{int(r * 10) / 10:.1f}x"


@dataclass(frozen=True)
class GradientSchedule:
    """Two-phase residual schedule: codec residual early, 8-bit RTN later."""

    switch_step: int = 2500
    phase1_residual_bits: float = 3.5
    phase2_residual_mode: str = "rtn8"
    base_bits: float = 3.5
    total_steps: int = 8000

    def __post_init__(self):
        if not 0 < self.switch_step <= self.total_steps:
            raise ValueError("switch_step must lie in (0, total_steps]")
        for b in (self.phase1_residual_bits, self.base_bits):
            if not 0 < b <= 8:
                raise ValueError(f"bit target {b} outside (0, 8]")
        if self.phase2_residual_mode != "rtn8":
            raise ValueError("only the rtn8 phase-2 residual mode exists")

    def average_bits(self) -> float:
        """Closed-form mean transmitted bits per value over the whole run."""
        early = self.switch_step * (self.base_bits + self.phase1_residual_bits)
        late = (self.total_steps - self.switch_step) * (self.base_bits + 8.0)
        return (early + late) / self.total_steps


# Fixed-rate 8-bit transport: unit-step quantizer on integer codes is exact,
# and with entropy off every level is stored at a fixed width.
_RTN8_TRANSPORT = CodecConfig(
    qp=4, enable_prediction=False, enable_transform=False, enable_entropy=False
)


@dataclass(frozen=True, eq=False)
class GradientPayload:
    """One training step's transmitted pair: coarse base plus residual."""

    base: CompressedTensor
    residual: CompressedTensor
    step: int
    phase: int
    base_bits: float
    residual_bits: float

    @property
    def bits_per_value(self) -> float:
        return self.base_bits + self.residual_bits


def compress_gradient(
    g: Tensor,
    step: int,
    sched: GradientSchedule | None = None,
    config: CodecConfig | None = None,
    frame_side: int = 1024,
) -> GradientPayload:
    """Residual compensation: send Comp(G) and Comp2(G - Comp(G)) each step."""
    sched = sched or GradientSchedule()
    if g.role not in GRADIENT_ROLES:
        raise ValueError(f"compress_gradient expects {GRADIENT_ROLES}, got {g.role}")
    if step >= sched.total_steps:
        raise ValueError(f"step {step} outside the schedule's {sched.total_steps} steps")
    phase = 1 if step < sched.switch_step else 2
    base = _compress_tensor(
        g,
        target_bits=sched.base_bits,
        config=config,
        frame_side=frame_side,
        ext=GradientExt(phase, step),
    )
    residual = Tensor(
        g.dims,
        g.channel_axis,
        g.role,
        g.values.astype(np.float64) - decompress(base).values.astype(np.float64),
    )
    if phase == 1:
        res_ct = _compress_tensor(
            residual,
            target_bits=sched.phase1_residual_bits,
            config=config,
            frame_side=frame_side,
            ext=GradientExt(phase, step),
        )
    else:
        res_ct = _compress_tensor(
            residual,
            fixed_qp=_RTN8_TRANSPORT.qp,
            config=_RTN8_TRANSPORT,
            frame_side=frame_side,
            ext=GradientExt(phase, step),
        )
    return GradientPayload(
        base,
        res_ct,
        step,
        phase,
        base.report.bits_per_value,
        res_ct.report.bits_per_value,
    )


def decompress_gradient(payload: GradientPayload) -> Tensor:
    """Reconstruction = Comp(G) + Comp2(G - Comp(G))."""
    base = decompress(payload.base)
    res = decompress(payload.residual)
    return Tensor(
        base.dims,
        base.channel_axis,
        base.role,
        base.values.astype(np.float64) + res.values.astype(np.float64),
    )


def roundtrip_metrics(t: Tensor, ct):
    return metrics_from_arrays(t.values, decompress(ct).values)
