"""Stage-1 round-to-nearest quantizers producing the codec's 8-bit input planes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, tensor_from_plane

MODES = ("symmetric_rtn", "asymmetric_minmax")
GRANULARITIES = ("per_tensor", "per_channel", "per_group")


@dataclass(frozen=True)
class QuantScheme:
    """Quantizer parameters: mode, bit width, and grouping granularity.

    per_channel groups along `axis` of the 2D plane; per_group splits each
    row into consecutive runs of `group_size` values.
    """

    mode: str = "symmetric_rtn"
    bits: int = 8
    granularity: str = "per_channel"
    axis: int = 0
    group_size: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown quant mode {self.mode!r}")
        if self.granularity not in GRANULARITIES:
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if not 2 <= self.bits <= 8:
            raise ValueError(f"bits {self.bits} outside [2, 8]")
        if self.granularity == "per_channel" and self.axis not in (0, 1):
            raise ValueError("per_channel axis must be 0 or 1")
        if self.granularity == "per_group" and self.group_size < 1:
            raise ValueError("per_group requires a positive group_size")


@dataclass(frozen=True, eq=False)
class QuantizedPlane:
    """8-bit codes plus per-group scale/zero-point, with source tensor metadata."""

    codes: np.ndarray  # uint8, 2D, same logical dims as the source plane
    scales: np.ndarray  # float32, one per group
    zero_points: np.ndarray  # int32, one per group (all offset for symmetric)
    scheme: QuantScheme
    source_dims: tuple = ()
    channel_axis: int = 0
    role: str = "weight"

    @property
    def shape(self):
        return self.codes.shape


def _round_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero (sign-symmetric, unlike banker's rounding)."""
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def _group_reduce(plane: np.ndarray, scheme: QuantScheme, fn):
    """Apply a reduction per group, returning values broadcastable to the plane."""
    if scheme.granularity == "per_tensor":
        return fn(plane, axis=None, keepdims=True)
    if scheme.granularity == "per_channel":
        return fn(plane, axis=1 - scheme.axis, keepdims=True)
    rows, cols = plane.shape
    g = scheme.group_size
    if cols % g != 0:
        raise ValueError(f"group size {g} does not divide row length {cols}")
    grouped = plane.reshape(rows, cols // g, g)
    return fn(grouped, axis=2, keepdims=True).reshape(rows, cols // g, 1)


def _grouped(plane: np.ndarray, scheme: QuantScheme) -> np.ndarray:
    if scheme.granularity == "per_group":
        rows, cols = plane.shape
        return plane.reshape(rows, cols // scheme.group_size, scheme.group_size)
    return plane


def _ungrouped(arr: np.ndarray, shape) -> np.ndarray:
    return arr.reshape(shape)


def quantize_plane(plane: np.ndarray, scheme: QuantScheme) -> QuantizedPlane:
    """Quantize a 2D float plane to unsigned codes of `scheme.bits` width."""
    plane = np.asarray(plane, dtype=np.float64)
    if plane.ndim != 2:
        raise ValueError("quantize_plane expects a 2D array")
    n = scheme.bits
    half = 1 << (n - 1)
    grouped = _grouped(plane, scheme)
    if scheme.mode == "symmetric_rtn":
        # Delta = max|w| / 2^(N-1); the positive extreme reconstructs exactly.
        # Levels occupy [-(half-1), half], offset by half-1 into [0, 2^N - 1].
        absmax = _group_reduce(np.abs(plane), scheme, np.max)
        delta = absmax / half
        safe = np.where(delta > 0.0, delta, 1.0)
        levels = np.clip(_round_away(grouped / safe), -(half - 1), half)
        codes = (levels + (half - 1)).astype(np.uint8)
        scales = delta.reshape(-1).astype(np.float32)
        zps = np.full(scales.shape, half - 1, dtype=np.int32)
    else:
        lo = _group_reduce(plane, scheme, np.min)
        hi = _group_reduce(plane, scheme, np.max)
        span = hi - lo
        qmax = (1 << n) - 1
        scale = span / qmax
        # Constant groups: anchor the scale on the value itself so it survives.
        const = span == 0.0
        scale = np.where(const, np.abs(hi) / qmax, scale)
        zp = np.where(
            const,
            np.where(hi >= 0.0, 0.0, float(qmax)),
            _round_away(-lo / np.where(scale > 0.0, scale, 1.0)),
        )
        safe = np.where(scale > 0.0, scale, 1.0)
        q = _round_away(grouped / safe) + zp
        codes = np.clip(q, 0, qmax).astype(np.uint8)
        scales = scale.reshape(-1).astype(np.float32)
        zps = zp.reshape(-1).astype(np.int32)
    codes = _ungrouped(codes, plane.shape)
    codes.setflags(write=False)
    return QuantizedPlane(codes, scales, zps, scheme)


def dequantize_plane(q: QuantizedPlane, codes: np.ndarray | None = None) -> np.ndarray:
    """Reconstruct the float32 plane from codes (optionally codec-modified ones)."""
    codes = q.codes if codes is None else codes
    if codes.shape != q.codes.shape:
        raise ValueError("codes shape does not match the quantized plane")
    scheme = q.scheme
    rows, cols = codes.shape
    if scheme.granularity == "per_tensor":
        bshape = (1, 1)
    elif scheme.granularity == "per_channel":
        bshape = (rows, 1) if scheme.axis == 0 else (1, cols)
    else:
        bshape = (rows, cols // scheme.group_size, 1)
    scales = q.scales.astype(np.float64).reshape(bshape)
    zps = q.zero_points.astype(np.float64).reshape(bshape)
    grouped = _grouped(codes.astype(np.float64), scheme)
    plane = (grouped - zps) * scales
    return _ungrouped(plane, codes.shape).astype(np.float32)


def rtn_quantize(t: Tensor, scheme: QuantScheme) -> QuantizedPlane:
    """Quantize a tensor's 2D coding plane, keeping metadata for the inverse."""
    q = quantize_plane(t.plane(), scheme)
    return QuantizedPlane(
        q.codes, q.scales, q.zero_points, scheme, t.dims, t.channel_axis, t.role
    )


def rtn_dequantize(q: QuantizedPlane, codes: np.ndarray | None = None) -> Tensor:
    if not q.source_dims:
        raise ValueError("quantized plane carries no source tensor metadata")
    plane = dequantize_plane(q, codes)
    return tensor_from_plane(plane, q.source_dims, q.channel_axis, q.role)


def default_scheme_for(t: Tensor) -> QuantScheme:
    """Channel-wise symmetric 8-bit quantization along the tensor's channel axis."""
    return QuantScheme("symmetric_rtn", 8, "per_channel", axis=t.plane_axis())
