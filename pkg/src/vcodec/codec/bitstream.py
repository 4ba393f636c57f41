"""Self-describing compressed container: header, frame index, and payload.

The container carries everything needed to decode: codec configuration,
original tensor dims, stage-1 quantization parameters, optional rotation or
gradient extensions, and per-frame byte offsets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import BadMagicError, CorruptSegmentError, PayloadMismatchError, VersionError
from ..quant import QuantScheme, QuantizedPlane
from ..tensor import ROLES, _ROLE_CODE
from .config import CodecConfig, Frame
from .frame_codec import _encode_frame_full, decode_frame, encode_frame

MAGIC = b"VCBS"
VERSION = 1

EXT_NONE, EXT_ROTATION, EXT_GRADIENT = 0, 1, 2

_MODE_CODE = {"symmetric_rtn": 0, "asymmetric_minmax": 1}
_MODE_NAME = {v: k for k, v in _MODE_CODE.items()}
_GRAN_CODE = {"per_tensor": 0, "per_channel": 1, "per_group": 2}
_GRAN_NAME = {v: k for k, v in _GRAN_CODE.items()}

MIN_FRAME_SIDE_LIMIT = 64
MAX_FRAME_SIDE_LIMIT = 4096


@dataclass(frozen=True)
class RotationExt:
    seed: int
    rows_rotated: bool
    cols_rotated: bool


@dataclass(frozen=True)
class GradientExt:
    phase: int  # 1 = codec-coded residual, 2 = fixed 8-bit residual
    step: int


@dataclass(frozen=True)
class TileGrid:
    """Arithmetic description of how a plane tiles into frames."""

    plane_rows: int
    plane_cols: int
    frame_side: int

    def tiles(self):
        for r0 in range(0, self.plane_rows, self.frame_side):
            r1 = min(r0 + self.frame_side, self.plane_rows)
            for c0 in range(0, self.plane_cols, self.frame_side):
                c1 = min(c0 + self.frame_side, self.plane_cols)
                yield r0, r1, c0, c1

    @property
    def count(self) -> int:
        down = -(-self.plane_rows // self.frame_side)
        across = -(-self.plane_cols // self.frame_side)
        return down * across


def frames_from_plane(plane, max_frame_side: int = 1024):
    """Tile an 8-bit code plane into frames; reassembly is exact."""
    if not MIN_FRAME_SIDE_LIMIT <= max_frame_side <= MAX_FRAME_SIDE_LIMIT:
        raise ValueError(f"max_frame_side {max_frame_side} outside [64, 4096]")
    codes = plane.codes if isinstance(plane, QuantizedPlane) else np.asarray(plane)
    if codes.dtype != np.uint8 or codes.ndim != 2:
        raise ValueError("expected a 2D uint8 code plane")
    grid = TileGrid(codes.shape[0], codes.shape[1], max_frame_side)
    frames = [
        Frame(c1 - c0, r1 - r0, codes[r0:r1, c0:c1]) for r0, r1, c0, c1 in grid.tiles()
    ]
    return frames, grid


def reassemble_plane(frames, grid: TileGrid) -> np.ndarray:
    plane = np.empty((grid.plane_rows, grid.plane_cols), dtype=np.uint8)
    tiles = list(grid.tiles())
    if len(frames) != len(tiles):
        raise ValueError(f"expected {len(tiles)} frames, got {len(frames)}")
    for frame, (r0, r1, c0, c1) in zip(frames, tiles):
        if frame.width != c1 - c0 or frame.height != r1 - r0:
            raise ValueError("frame dims do not match the tile grid")
        plane[r0:r1, c0:c1] = frame.samples
    return plane


@dataclass(frozen=True, eq=False)
class Bitstream:
    """Parsed container header plus raw frame segments."""

    config: CodecConfig
    role: str
    dims: tuple
    channel_axis: int
    plane_shape: tuple
    frame_side: int
    scheme: QuantScheme
    scales: np.ndarray
    zero_points: np.ndarray
    ext: RotationExt | GradientExt | None
    segments: tuple

    @property
    def element_count(self) -> int:
        return int(np.prod(self.dims))

    def grid(self) -> TileGrid:
        return TileGrid(self.plane_shape[0], self.plane_shape[1], self.frame_side)


def _pack_config(cfg: CodecConfig) -> bytes:
    toggles = (
        (1 if cfg.enable_prediction else 0)
        | (2 if cfg.enable_transform else 0)
        | (4 if cfg.enable_entropy else 0)
    )
    return struct.pack("<BBBBf8x", cfg.ctu_size, cfg.min_block, cfg.qp, toggles, cfg.lambda_scale)


def _unpack_config(data: bytes, off: int) -> CodecConfig:
    ctu, min_block, qp, toggles, lam = struct.unpack_from("<BBBBf", data, off)
    if any(data[off + 8 : off + 16]):
        raise VersionError("reserved config bytes are nonzero")
    return CodecConfig(
        ctu_size=ctu,
        min_block=min_block,
        qp=qp,
        enable_prediction=bool(toggles & 1),
        enable_transform=bool(toggles & 2),
        enable_entropy=bool(toggles & 4),
        lambda_scale=float(lam),
    )


def encode_container(
    q: QuantizedPlane,
    config: CodecConfig,
    *,
    frame_side: int = 1024,
    ext: RotationExt | GradientExt | None = None,
) -> bytes:
    """Compress a quantized plane into a self-describing byte container."""
    frames, grid = frames_from_plane(q.codes, frame_side)
    segments = [encode_frame(f, config) for f in frames]
    return assemble_container(q, config, grid, segments, ext=ext)


def encode_container_with_recon(
    q: QuantizedPlane,
    config: CodecConfig,
    *,
    frame_side: int = 1024,
    ext: RotationExt | GradientExt | None = None,
):
    """encode_container plus the decoder-identical reconstructed code plane.

    Used by rate search to measure distortion without a decode pass; a final
    independent decode still verifies the reported numbers.
    """
    frames, grid = frames_from_plane(q.codes, frame_side)
    pairs = [_encode_frame_full(f, config) for f in frames]
    segments = [seg for seg, _ in pairs]
    recon_frames = [Frame(f.width, f.height, rec) for f, (_, rec) in zip(frames, pairs)]
    recon = reassemble_plane(recon_frames, grid)
    data = assemble_container(q, config, grid, segments, ext=ext)
    return data, recon


def assemble_container(q, config, grid, segments, *, ext=None) -> bytes:
    dims = q.source_dims if q.source_dims else q.codes.shape
    scheme = q.scheme
    parts = [MAGIC, struct.pack("<H", VERSION), _pack_config(config)]
    parts.append(
        struct.pack(
            "<BBBIIH",
            _ROLE_CODE[q.role],
            len(dims),
            q.channel_axis,
            grid.plane_rows,
            grid.plane_cols,
            grid.frame_side,
        )
    )
    parts.append(struct.pack(f"<{len(dims)}Q", *dims))
    parts.append(
        struct.pack(
            "<BBBBII",
            _MODE_CODE[scheme.mode],
            scheme.bits,
            _GRAN_CODE[scheme.granularity],
            scheme.axis,
            scheme.group_size,
            q.scales.size,
        )
    )
    parts.append(q.scales.astype("<f4").tobytes())
    if scheme.mode == "asymmetric_minmax":
        parts.append(q.zero_points.astype("<i4").tobytes())
    if ext is None:
        parts.append(struct.pack("<B", EXT_NONE))
    elif isinstance(ext, RotationExt):
        parts.append(
            struct.pack("<BQBB", EXT_ROTATION, ext.seed, int(ext.rows_rotated), int(ext.cols_rotated))
        )
    elif isinstance(ext, GradientExt):
        parts.append(struct.pack("<BBI", EXT_GRADIENT, ext.phase, ext.step))
    else:
        raise ValueError(f"unknown extension {ext!r}")
    payload = b"".join(segments)
    offsets = np.cumsum([0] + [len(s) for s in segments[:-1]]).astype("<u8")
    parts.append(struct.pack("<IQ", len(segments), len(payload)))
    parts.append(offsets.tobytes())
    parts.append(payload)
    return b"".join(parts)


def parse_container(data: bytes) -> Bitstream:
    if len(data) < 22 or data[:4] != MAGIC:
        raise BadMagicError(f"not a VCBS container: {data[:4]!r}")
    (version,) = struct.unpack_from("<H", data, 4)
    if version != VERSION:
        raise VersionError(f"unsupported container version {version}")
    config = _unpack_config(data, 6)
    off = 22
    role_code, ndim, channel_axis, plane_rows, plane_cols, frame_side = struct.unpack_from(
        "<BBBIIH", data, off
    )
    off += 13
    if role_code >= len(ROLES):
        raise PayloadMismatchError(f"unknown role code {role_code}")
    dims = struct.unpack_from(f"<{ndim}Q", data, off)
    off += 8 * ndim
    mode_code, bits, gran_code, axis, group_size, n_groups = struct.unpack_from("<BBBBII", data, off)
    off += 12
    if mode_code not in _MODE_NAME or gran_code not in _GRAN_NAME:
        raise PayloadMismatchError("unknown quantization scheme codes")
    scheme = QuantScheme(
        _MODE_NAME[mode_code], bits, _GRAN_NAME[gran_code], axis=axis, group_size=group_size
    )
    scales = np.frombuffer(data, dtype="<f4", count=n_groups, offset=off).copy()
    off += 4 * n_groups
    if scheme.mode == "asymmetric_minmax":
        zero_points = np.frombuffer(data, dtype="<i4", count=n_groups, offset=off).copy()
        off += 4 * n_groups
    else:
        zero_points = np.full(n_groups, (1 << (bits - 1)) - 1, dtype=np.int32)
    (ext_tag,) = struct.unpack_from("<B", data, off)
    off += 1
    ext: RotationExt | GradientExt | None
    if ext_tag == EXT_NONE:
        ext = None
    elif ext_tag == EXT_ROTATION:
        seed, rows_rot, cols_rot = struct.unpack_from("<QBB", data, off)
        off += 10
        ext = RotationExt(seed, bool(rows_rot), bool(cols_rot))
    elif ext_tag == EXT_GRADIENT:
        phase, step = struct.unpack_from("<BI", data, off)
        off += 5
        ext = GradientExt(phase, step)
    else:
        raise PayloadMismatchError(f"unknown extension tag {ext_tag}")
    frame_count, payload_len = struct.unpack_from("<IQ", data, off)
    off += 12
    grid = TileGrid(plane_rows, plane_cols, frame_side)
    if frame_count != grid.count:
        raise PayloadMismatchError(
            f"frame count {frame_count} does not match the {grid.count}-tile grid"
        )
    offsets = np.frombuffer(data, dtype="<u8", count=frame_count, offset=off)
    off += 8 * frame_count
    if len(data) - off != payload_len:
        raise PayloadMismatchError(
            f"payload is {len(data) - off} bytes, header declares {payload_len}"
        )
    payload = data[off:]
    bounds = list(offsets) + [payload_len]
    if any(bounds[i] > bounds[i + 1] for i in range(frame_count)):
        raise PayloadMismatchError("frame offsets are not monotone")
    segments = tuple(
        payload[int(bounds[i]) : int(bounds[i + 1])] for i in range(frame_count)
    )
    return Bitstream(
        config,
        ROLES[role_code],
        tuple(int(d) for d in dims),
        channel_axis,
        (plane_rows, plane_cols),
        frame_side,
        scheme,
        scales,
        zero_points,
        ext,
        segments,
    )


def decode_container(data: bytes):
    """Parse and fully decode a container.

    Returns (QuantizedPlane with decoded codes, Bitstream header info).
    """
    bs = parse_container(data)
    frames = [decode_frame(seg, bs.config) for seg in bs.segments]
    try:
        codes = reassemble_plane(frames, bs.grid())
    except ValueError as exc:
        raise CorruptSegmentError(str(exc)) from exc
    q = QuantizedPlane(
        codes, bs.scales, bs.zero_points, bs.scheme, bs.dims, bs.channel_axis, bs.role
    )
    return q, bs
