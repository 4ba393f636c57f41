"""Intra-only frame codec: quad-tree partitioning, prediction, transform, coding.

Encoder and decoder share the reconstruction math, so the encoder's internal
reconstruction is bit-exact with the decoder's output. Frames are coded with
no cross-frame state of any kind.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CorruptSegmentError, TruncatedStreamError
from .config import MAX_FRAME_SIDE, CodecConfig, Frame
from .dct import dct_matrix, zigzag_order
from .entropy import (
    BinaryDecoder,
    BinaryEncoder,
    RawDecoder,
    RawEncoder,
    get_eg_ctx,
    get_eg_k_ctx,
    put_eg_ctx,
    put_eg_k_ctx,
)
from .predict import gather_refs, predict_all, predict_single
from .quantizer import qp_step

# One adaptive context per syntax element kind x block-size class (4..64).
_N_CLASSES = 5
_CTX_SPLIT, _CTX_MODE, _CTX_CBF, _CTX_LAST, _CTX_SIG, _CTX_GT1, _CTX_LEVEL = range(7)
N_CTX = 7 * _N_CLASSES

_DEAD_ZONE = 1.0 / 3.0
_EG_K_MAX = 10


def _cls(size: int) -> int:
    return size.bit_length() - 3  # 4 -> 0 ... 64 -> 4


def _pad_to_multiple(samples: np.ndarray, block: int) -> np.ndarray:
    h, w = samples.shape
    ph = -h % block
    pw = -w % block
    if ph or pw:
        samples = np.pad(samples, ((0, ph), (0, pw)), mode="edge")
    return samples


def _rate_estimate(levels: np.ndarray) -> float:
    """Approximate coded bits for a zigzag level array (binarization length)."""
    nz = np.nonzero(levels)[0]
    if nz.size == 0:
        return 0.0
    last = int(nz[-1])
    mags = np.abs(levels[nz])
    rem = mags - 2
    big = rem[rem >= 0] + 1
    eg_bits = 0.0
    if big.size:
        eg_bits = float(np.sum(2 * np.floor(np.log2(big)) + 1))
    last_bits = 2 * ((last + 1).bit_length() - 1) + 1
    return last_bits + last + 2.0 * nz.size + eg_bits


def _recon_from_deq(pred: np.ndarray, deq_zz: np.ndarray, size: int, transform: bool) -> np.ndarray:
    """Shared encoder/decoder reconstruction of one block from dequantized data."""
    flat = np.zeros(size * size, dtype=np.float64)
    flat[zigzag_order(size)] = deq_zz
    coeffs = flat.reshape(size, size)
    if transform:
        c = dct_matrix(size)
        res = c.T @ coeffs @ c
    else:
        res = coeffs
    return np.clip(np.rint(pred + res), 0, 255).astype(np.int64)


class _RawLevelRecorder:
    """Collects structural bits and level blocks for fixed-length serialization.

    With the entropy stage off, levels are stored at a fixed per-frame width
    instead of adaptively coded, so nothing depends on symbol statistics.
    """

    __slots__ = ("events", "level_blocks")

    def __init__(self):
        self.events = []
        self.level_blocks = []

    def encode_bit(self, ctx, bit):
        self.events.append((bit & 1, 1))

    def encode_bypass(self, value, nbits):
        self.events.append((value & ((1 << nbits) - 1), nbits))

    def put_levels(self, levels: np.ndarray):
        idx = len(self.level_blocks)
        self.level_blocks.append(levels)
        self.events.append(("levels", idx))

    def serialize(self) -> bytes:
        max_mag = 0
        has_neg = False
        for lv in self.level_blocks:
            if lv.size:
                mx = int(np.max(lv))
                mn = int(np.min(lv))
                max_mag = max(max_mag, mx, -mn)
                has_neg = has_neg or mn < 0
        width = max_mag.bit_length() + (1 if has_neg else 0)
        offset = (1 << (width - 1)) if has_neg else 0
        out = RawEncoder()
        out.encode_bypass(width | (0x80 if has_neg else 0), 8)
        push = out.encode_bypass
        for ev in self.events:
            if ev[0] == "levels":
                lv = self.level_blocks[ev[1]]
                if width:
                    for v in (lv + offset).tolist():
                        push(v, width)
            else:
                push(ev[0], ev[1])
        return out.finish()


class _FrameCoder:
    """Encoder state for one frame: planning pass plus final emission pass."""

    def __init__(self, padded: np.ndarray, cfg: CodecConfig):
        self.cfg = cfg
        self.orig = padded.astype(np.int64)
        self.h, self.w = padded.shape
        self.recon = np.zeros((self.h, self.w), dtype=np.int64)
        self.step = qp_step(cfg.qp)
        self.lam = cfg.rd_lambda()
        self.splits: dict = {}

    def _leaf_best(self, x: int, y: int, size: int, buf: np.ndarray, n_candidates: int):
        """Best (cost, mode, levels_zz, deq_zz, pred) for a leaf at (x, y)."""
        cfg = self.cfg
        block = self.orig[y : y + size, x : x + size]
        if cfg.enable_prediction:
            top, left, corner, a_top, a_left = gather_refs(buf, x, y, size)
            preds = predict_all(top, left, corner, size, a_top, a_left)
            sad = np.abs(preds - block[None]).sum(axis=(1, 2))
            candidates = np.argsort(sad, kind="stable")[:n_candidates].tolist()
            mode_bits = 3.0
        else:
            preds = np.zeros((1, size, size), dtype=np.int64)
            candidates = [0]
            mode_bits = 0.0
        order = zigzag_order(size)
        c = dct_matrix(size) if cfg.enable_transform else None
        step = self.step
        best = None
        for m in candidates:
            res = (block - preds[m]).astype(np.float64)
            coeffs = (c @ res @ c.T) if c is not None else res
            flat = coeffs.reshape(-1)[order]
            levels = (np.sign(flat) * np.floor(np.abs(flat) / step + _DEAD_ZONE)).astype(np.int64)
            deq = levels * step
            dist = float(np.sum((flat - deq) ** 2))
            rate = _rate_estimate(levels) + mode_bits + 1.0
            cost = dist + self.lam * rate
            if best is None or cost < best[0]:
                best = (cost, m, levels, deq, preds[m])
        return best

    # Planning pass: decide the quad-tree using original samples as neighbor
    # proxies; the bitstream-visible decisions live in self.splits.
    def plan(self):
        ctu = self.cfg.ctu_size
        for cy in range(0, self.h, ctu):
            for cx in range(0, self.w, ctu):
                self._plan_node(cx, cy, ctu)

    def _plan_node(self, x: int, y: int, size: int) -> float:
        if x >= self.w or y >= self.h:
            return 0.0
        half = size // 2
        if x + size > self.w or y + size > self.h:
            return sum(
                self._plan_node(x + dx, y + dy, half)
                for dx, dy in ((0, 0), (half, 0), (0, half), (half, half))
            )
        leaf_cost = self._leaf_best(x, y, size, self.orig, 1)[0]
        if size == self.cfg.min_block:
            return leaf_cost
        split_cost = sum(
            self._plan_node(x + dx, y + dy, half)
            for dx, dy in ((0, 0), (half, 0), (0, half), (half, half))
        )
        split = split_cost < leaf_cost
        self.splits[(x, y, size)] = split
        return self.lam + (split_cost if split else leaf_cost)

    # Emission pass: reconstruct exactly as the decoder will.
    def emit(self, sink):
        ctu = self.cfg.ctu_size
        for cy in range(0, self.h, ctu):
            for cx in range(0, self.w, ctu):
                self._emit_node(sink, cx, cy, ctu)

    def _emit_node(self, sink, x: int, y: int, size: int):
        if x >= self.w or y >= self.h:
            return
        half = size // 2
        if x + size > self.w or y + size > self.h:
            for dx, dy in ((0, 0), (half, 0), (0, half), (half, half)):
                self._emit_node(sink, x + dx, y + dy, half)
            return
        if size > self.cfg.min_block:
            split = self.splits[(x, y, size)]
            sink.encode_bit(_CTX_SPLIT * _N_CLASSES + _cls(size), int(split))
            if split:
                for dx, dy in ((0, 0), (half, 0), (0, half), (half, half)):
                    self._emit_node(sink, x + dx, y + dy, half)
                return
        self._emit_leaf(sink, x, y, size)

    def _emit_leaf(self, sink, x: int, y: int, size: int):
        cfg = self.cfg
        _, mode, levels, deq, pred = self._leaf_best(x, y, size, self.recon, 2)
        cls = _cls(size)
        if cfg.enable_prediction:
            ctx = _CTX_MODE * _N_CLASSES + cls
            sink.encode_bit(ctx, (mode >> 2) & 1)
            sink.encode_bit(ctx, (mode >> 1) & 1)
            sink.encode_bit(ctx, mode & 1)
        cbf = bool(np.any(levels))
        sink.encode_bit(_CTX_CBF * _N_CLASSES + cls, int(cbf))
        if cbf:
            if cfg.enable_entropy:
                _write_levels_adaptive(sink, levels, cls)
            else:
                sink.put_levels(levels)
        self.recon[y : y + size, x : x + size] = _recon_from_deq(
            pred, deq, size, cfg.enable_transform
        )


def _write_levels_adaptive(sink, levels: np.ndarray, cls: int):
    """Last position, significance flags, then magnitudes and signs."""
    nz = np.nonzero(levels)[0]
    last = int(nz[-1])
    put_eg_ctx(sink, last, _CTX_LAST * _N_CLASSES + cls)
    encode_bit = sink.encode_bit
    sig_ctx = _CTX_SIG * _N_CLASSES + cls
    for b in (levels[:last] != 0).view(np.int8).tolist():
        encode_bit(sig_ctx, b)
    gt1_ctx = _CTX_GT1 * _N_CLASSES + cls
    level_ctx = _CTX_LEVEL * _N_CLASSES + cls
    encode_bypass = sink.encode_bypass
    k = 0
    for v in levels[nz].tolist():
        mag = v if v > 0 else -v
        if mag > 1:
            encode_bit(gt1_ctx, 1)
            rem = mag - 2
            put_eg_k_ctx(sink, rem, k, level_ctx)
            if rem > (3 << k) and k < _EG_K_MAX:
                k += 1
        else:
            encode_bit(gt1_ctx, 0)
        encode_bypass(1 if v < 0 else 0, 1)


def _read_levels_adaptive(src, n2: int, cls: int) -> np.ndarray:
    last = get_eg_ctx(src, _CTX_LAST * _N_CLASSES + cls)
    if last >= n2:
        raise CorruptSegmentError(f"last coefficient index {last} out of range")
    levels = np.zeros(n2, dtype=np.int64)
    decode_bit = src.decode_bit
    sig_ctx = _CTX_SIG * _N_CLASSES + cls
    positions = [i for i in range(last) if decode_bit(sig_ctx)]
    positions.append(last)
    gt1_ctx = _CTX_GT1 * _N_CLASSES + cls
    level_ctx = _CTX_LEVEL * _N_CLASSES + cls
    decode_bypass = src.decode_bypass
    k = 0
    for i in positions:
        if decode_bit(gt1_ctx):
            rem = get_eg_k_ctx(src, k, level_ctx)
            mag = rem + 2
            if rem > (3 << k) and k < _EG_K_MAX:
                k += 1
        else:
            mag = 1
        levels[i] = -mag if decode_bypass(1) else mag
    return levels


class _RawLevelReader(RawDecoder):
    """RawDecoder plus the fixed-width level block read."""

    def __init__(self, data: bytes):
        super().__init__(data)
        header = self.decode_bypass(8)
        self.width = header & 0x7F
        self.offset = (1 << (self.width - 1)) if header & 0x80 else 0

    def get_levels(self, n2: int) -> np.ndarray:
        width = self.width
        if width == 0:
            raise CorruptSegmentError("coded block with zero level width")
        read = self.decode_bypass
        offset = self.offset
        return np.fromiter(
            (read(width) - offset for _ in range(n2)), dtype=np.int64, count=n2
        )


class _FrameParser:
    """Decoder state for one frame."""

    def __init__(self, ph: int, pw: int, cfg: CodecConfig, src):
        self.cfg = cfg
        self.h, self.w = ph, pw
        self.recon = np.zeros((ph, pw), dtype=np.int64)
        self.step = qp_step(cfg.qp)
        self.src = src

    def run(self):
        ctu = self.cfg.ctu_size
        for cy in range(0, self.h, ctu):
            for cx in range(0, self.w, ctu):
                self._parse_node(cx, cy, ctu)

    def _parse_node(self, x: int, y: int, size: int):
        if x >= self.w or y >= self.h:
            return
        half = size // 2
        if x + size > self.w or y + size > self.h:
            for dx, dy in ((0, 0), (half, 0), (0, half), (half, half)):
                self._parse_node(x + dx, y + dy, half)
            return
        if size > self.cfg.min_block:
            if self.src.decode_bit(_CTX_SPLIT * _N_CLASSES + _cls(size)):
                for dx, dy in ((0, 0), (half, 0), (0, half), (half, half)):
                    self._parse_node(x + dx, y + dy, half)
                return
        self._parse_leaf(x, y, size)

    def _parse_leaf(self, x: int, y: int, size: int):
        cfg = self.cfg
        src = self.src
        cls = _cls(size)
        if cfg.enable_prediction:
            ctx = _CTX_MODE * _N_CLASSES + cls
            mode = (src.decode_bit(ctx) << 2) | (src.decode_bit(ctx) << 1) | src.decode_bit(ctx)
        else:
            mode = 0
        n2 = size * size
        if src.decode_bit(_CTX_CBF * _N_CLASSES + cls):
            if cfg.enable_entropy:
                levels = _read_levels_adaptive(src, n2, cls)
            else:
                levels = src.get_levels(n2)
        else:
            levels = np.zeros(n2, dtype=np.int64)
        if cfg.enable_prediction:
            top, left, corner, a_top, a_left = gather_refs(self.recon, x, y, size)
            pred = predict_single(mode, top, left, corner, size, a_top, a_left)
        else:
            pred = np.zeros((size, size), dtype=np.int64)
        self.recon[y : y + size, x : x + size] = _recon_from_deq(
            pred, levels * self.step, size, cfg.enable_transform
        )


def _encode_frame_full(frame: Frame, config: CodecConfig):
    """Encode and also return the padded reconstruction (decoder-identical)."""
    padded = _pad_to_multiple(frame.samples, config.min_block)
    coder = _FrameCoder(padded, config)
    coder.plan()
    header = struct.pack("<HH", frame.width, frame.height)
    if config.enable_entropy:
        sink = BinaryEncoder(N_CTX)
        coder.emit(sink)
        payload = sink.finish()
    else:
        recorder = _RawLevelRecorder()
        coder.emit(recorder)
        payload = recorder.serialize()
    recon = coder.recon[: frame.height, : frame.width].astype(np.uint8)
    return header + payload, recon


def encode_frame(frame: Frame, config: CodecConfig) -> bytes:
    """Encode one frame to a self-contained segment (dims header + payload)."""
    segment, _ = _encode_frame_full(frame, config)
    return segment


def decode_frame(segment: bytes, config: CodecConfig) -> Frame:
    """Exact inverse of encode_frame for the same config."""
    if len(segment) < 4:
        raise CorruptSegmentError("segment shorter than its dims header")
    w, h = struct.unpack_from("<HH", segment, 0)
    if not 1 <= w <= MAX_FRAME_SIDE or not 1 <= h <= MAX_FRAME_SIDE:
        raise CorruptSegmentError(f"decoded frame dims {w}x{h} out of range")
    payload = segment[4:]
    ph = h + (-h % config.min_block)
    pw = w + (-w % config.min_block)
    try:
        if config.enable_entropy:
            src = BinaryDecoder(payload, N_CTX)
        else:
            src = _RawLevelReader(payload)
        parser = _FrameParser(ph, pw, config, src)
        parser.run()
    except TruncatedStreamError as exc:
        raise CorruptSegmentError(f"segment truncated: {exc}") from exc
    return Frame(w, h, parser.recon[:h, :w].astype(np.uint8))
