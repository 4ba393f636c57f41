"""Tensor payload type, binary container, synthetic generators, and error metrics.

Values are kept at 32-bit float precision throughout; 16-bit sources are
widened on load. Tensors are immutable after construction and safe to share.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagicError, PayloadMismatchError, VersionError

ROLES = ("weight", "activation", "kv_cache", "weight_gradient", "activation_gradient")
_ROLE_CODE = {name: code for code, name in enumerate(ROLES)}

MAGIC = b"VCTN"
VERSION = 1
HEADER_FIXED = 16  # magic, version, dtype, role, ndim, channel_axis, 6 reserved
EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Tensor:
    """An n-dimensional float32 array with a declared channel axis and role."""

    dims: tuple
    channel_axis: int
    role: str
    values: np.ndarray  # flat, row-major, float32

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"dims must be positive, got {dims}")
        if not 0 <= self.channel_axis < len(dims):
            raise ValueError(f"channel_axis {self.channel_axis} out of range for {dims}")
        if self.role not in _ROLE_CODE:
            raise ValueError(f"unknown role {self.role!r}")
        values = np.ascontiguousarray(self.values, dtype=np.float32).reshape(-1)
        if values.size != int(np.prod(dims)):
            raise ValueError(f"{values.size} values do not fill dims {dims}")
        if not np.all(np.isfinite(values)):
            raise ValueError("tensor values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def element_count(self) -> int:
        return self.values.size

    def reshaped(self) -> np.ndarray:
        """Read-only view shaped to dims."""
        return self.values.reshape(self.dims)

    def plane_axis(self) -> int:
        """Axis of the channel dimension within the 2D coding plane."""
        return self.channel_axis if len(self.dims) == 2 else 1

    def plane(self) -> np.ndarray:
        """The 2D view consumed by the codec.

        Rank-2 tensors keep their natural layout; other ranks are flattened
        to (product of non-channel axes) x (channel size).
        """
        arr = self.reshaped()
        if arr.ndim == 2:
            return arr
        chan = self.dims[self.channel_axis]
        return np.moveaxis(arr, self.channel_axis, -1).reshape(-1, chan)


def tensor_from_plane(plane: np.ndarray, dims, channel_axis: int, role: str) -> Tensor:
    """Inverse of Tensor.plane(): rebuild a tensor from its 2D coding view."""
    dims = tuple(int(d) for d in dims)
    if len(dims) == 2:
        flat = np.asarray(plane, dtype=np.float32).reshape(-1)
    else:
        chan = dims[channel_axis]
        others = tuple(d for i, d in enumerate(dims) if i != channel_axis)
        arr = np.asarray(plane, dtype=np.float32).reshape(*others, chan)
        flat = np.moveaxis(arr, -1, channel_axis).reshape(-1)
    return Tensor(dims, channel_axis, role, flat)


def save_tensor(t: Tensor, destination) -> int:
    """Write the container to a path or binary file object; returns byte count."""
    header = MAGIC + struct.pack(
        "<HBBBB6x", VERSION, 0, _ROLE_CODE[t.role], len(t.dims), t.channel_axis
    )
    body = header + struct.pack(f"<{len(t.dims)}Q", *t.dims) + t.values.tobytes()
    if hasattr(destination, "write"):
        destination.write(body)
    else:
        with open(destination, "wb") as fh:
            fh.write(body)
    return len(body)


def load_tensor(source) -> Tensor:
    """Read a container from a path, bytes, or binary file object."""
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if len(data) < HEADER_FIXED or data[:4] != MAGIC:
        raise BadMagicError(f"not a VCTN container: {data[:4]!r}")
    version, dtype, role_code, ndim, channel_axis = struct.unpack_from("<HBBBB", data, 4)
    if version != VERSION:
        raise VersionError(f"unsupported container version {version}")
    if any(data[10:16]):
        raise VersionError("reserved header bytes are nonzero")
    if dtype != 0:
        raise VersionError(f"unsupported dtype code {dtype}")
    if role_code >= len(ROLES):
        raise PayloadMismatchError(f"unknown role code {role_code}")
    end = HEADER_FIXED + 8 * ndim
    if len(data) < end:
        raise PayloadMismatchError("truncated dims table")
    dims = struct.unpack_from(f"<{ndim}Q", data, HEADER_FIXED)
    expected = int(np.prod(dims)) * 4 if ndim else 0
    payload = data[end:]
    if ndim == 0 or len(payload) != expected:
        raise PayloadMismatchError(
            f"payload is {len(payload)} bytes, dims {dims} require {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    return Tensor(dims, channel_axis, ROLES[role_code], values)


def tensor_to_bytes(t: Tensor) -> bytes:
    buf = io.BytesIO()
    save_tensor(t, buf)
    return buf.getvalue()


def gen_synthetic(
    rows: int,
    cols: int,
    channel_corr: float,
    outlier_rate: float,
    outlier_scale: float,
    seed: int,
    role: str = "weight",
    outlier_mode: str = "scattered",
) -> Tensor:
    """Deterministic bell-shaped test tensor with channel structure and outliers.

    Each row (channel) is offset by a per-row mean scaled by channel_corr.
    Outliers multiply a fraction outlier_rate of entries by outlier_scale:
    "scattered" picks entries independently, "channel" amplifies whole rows
    (the shape runtime KV/activation outliers take).
    Out-of-range parameters raise; nothing is clamped silently.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if not 0.0 <= channel_corr <= 1.0:
        raise ValueError(f"channel_corr {channel_corr} outside [0, 1]")
    if not 0.0 <= outlier_rate <= 1.0:
        raise ValueError(f"outlier_rate {outlier_rate} outside [0, 1]")
    if outlier_scale < 1.0:
        raise ValueError(f"outlier_scale {outlier_scale} must be >= 1")
    if outlier_mode not in ("scattered", "channel"):
        raise ValueError(f"unknown outlier_mode {outlier_mode!r}")
    rng = np.random.default_rng(seed)
    row_means = rng.normal(0.0, 1.0, size=(rows, 1))
    noise = rng.normal(0.0, 1.0, size=(rows, cols))
    values = channel_corr * row_means + np.sqrt(1.0 - channel_corr**2) * noise
    if outlier_rate > 0.0:
        if outlier_mode == "scattered":
            mask = rng.random((rows, cols)) < outlier_rate
            values = np.where(mask, values * outlier_scale, values)
        else:
            count = max(1, int(np.ceil(outlier_rate * rows)))
            hot = rng.choice(rows, size=count, replace=False)
            values[hot, :] *= outlier_scale
    return Tensor((rows, cols), 0, role, values.astype(np.float32).reshape(-1))


def gen_synthetic_kv(
    tokens: int,
    channels: int,
    channel_corr: float,
    hot_token_rate: float,
    outlier_scale: float,
    seed: int,
    role: str = "kv_cache",
) -> Tensor:
    """Runtime-shaped test tensor: (tokens x channels) with the channel axis
    on dim 1, per-channel mean structure, and a few amplified token rows.

    Per-channel dynamic quantizers group across tokens, so hot tokens widen
    every channel's range; this is the shape runtime outliers take.
    """
    if tokens < 1 or channels < 1:
        raise ValueError("tokens and channels must be >= 1")
    if not 0.0 <= channel_corr <= 1.0:
        raise ValueError(f"channel_corr {channel_corr} outside [0, 1]")
    if not 0.0 <= hot_token_rate <= 1.0:
        raise ValueError(f"hot_token_rate {hot_token_rate} outside [0, 1]")
    if outlier_scale < 1.0:
        raise ValueError(f"outlier_scale {outlier_scale} must be >= 1")
    rng = np.random.default_rng(seed)
    col_means = rng.normal(0.0, 1.0, size=(1, channels))
    noise = rng.normal(0.0, 1.0, size=(tokens, channels))
    values = channel_corr * col_means + np.sqrt(1.0 - channel_corr**2) * noise
    if hot_token_rate > 0.0:
        count = max(1, int(np.ceil(hot_token_rate * tokens)))
        hot = rng.choice(tokens, size=count, replace=False)
        values[hot, :] *= outlier_scale
    return Tensor((tokens, channels), 1, role, values.astype(np.float32).reshape(-1))


@dataclass(frozen=True)
class ErrorMetrics:
    mse: float
    max_abs_err: float
    frobenius_rel_err: float


def error_metrics(a: Tensor, b: Tensor) -> ErrorMetrics:
    if a.dims != b.dims:
        raise ValueError(f"shape mismatch: {a.dims} vs {b.dims}")
    return metrics_from_arrays(a.values, b.values)


def metrics_from_arrays(a: np.ndarray, b: np.ndarray) -> ErrorMetrics:
    """Error metrics between two equally shaped arrays (computed in float64)."""
    a64 = np.asarray(a, dtype=np.float64).reshape(-1)
    b64 = np.asarray(b, dtype=np.float64).reshape(-1)
    if a64.shape != b64.shape:
        raise ValueError(f"shape mismatch: {a64.shape} vs {b64.shape}")
    diff = a64 - b64
    mse = float(np.mean(diff * diff))
    max_abs = float(np.max(np.abs(diff))) if diff.size else 0.0
    ref = max(float(np.linalg.norm(a64)), EPS)
    return ErrorMetrics(mse, max_abs, float(np.linalg.norm(diff)) / ref)
