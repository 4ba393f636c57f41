"""Adaptive binary arithmetic coder with per-context probabilities.

Byte-oriented range coder (carry handling via a cache byte) with 12-bit
probability states updated by shift-based estimation, initialized 50/50.
Bypass bits are batched per call. Raw (non-adaptive) bit sinks mirror the
same interface so the entropy stage can be toggled off without changing
any decoded value.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import CorruptSegmentError, TruncatedStreamError

PROB_BITS = 12
PROB_ONE = 1 << PROB_BITS
PROB_INIT = PROB_ONE // 2
ADAPT_SHIFT = 5
TOP = 1 << 24
MASK32 = 0xFFFFFFFF


class BinaryEncoder:
    """Range encoder over adaptive binary contexts."""

    __slots__ = ("low", "range", "cache", "cache_size", "probs", "_out")

    def __init__(self, n_contexts: int):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self.probs = [PROB_INIT] * n_contexts
        self._out = bytearray()

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > MASK32:
            carry = low >> 32
            out = self._out
            cache = self.cache
            while self.cache_size:
                out.append((cache + carry) & 0xFF)
                cache = 0xFF
                self.cache_size -= 1
            self.cache = (low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (low << 8) & MASK32

    def encode_bit(self, ctx: int, bit: int):
        probs = self.probs
        p = probs[ctx]
        r = self.range
        bound = (r >> PROB_BITS) * p
        if bit:
            self.low += bound
            r -= bound
            probs[ctx] = p - (p >> ADAPT_SHIFT)
        else:
            r = bound
            probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
        while r < TOP:
            self._shift_low()
            r <<= 8
        self.range = r

    def encode_bypass(self, value: int, nbits: int):
        """Equiprobable bits, most significant first, batched."""
        while nbits > 0:
            k = nbits if nbits <= 12 else 12
            nbits -= k
            chunk = (value >> nbits) & ((1 << k) - 1)
            r = self.range >> k
            self.low += chunk * r
            while r < TOP:
                self._shift_low()
                r <<= 8
            self.range = r

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)


class BinaryDecoder:
    """Mirror of BinaryEncoder; raises if the stream runs out early."""

    __slots__ = ("range", "code", "probs", "_data", "_pos")

    def __init__(self, data: bytes, n_contexts: int):
        self.range = MASK32
        self.probs = [PROB_INIT] * n_contexts
        self._data = data
        self._pos = 1  # first encoder byte is always 0
        if len(data) < 5:
            raise TruncatedStreamError("coded stream shorter than its preamble")
        code = 0
        for _ in range(4):
            code = (code << 8) | self._byte()
        self.code = code

    def _byte(self) -> int:
        pos = self._pos
        data = self._data
        if pos >= len(data):
            raise TruncatedStreamError("coded stream ended early")
        self._pos = pos + 1
        return data[pos]

    def decode_bit(self, ctx: int) -> int:
        probs = self.probs
        p = probs[ctx]
        r = self.range
        bound = (r >> PROB_BITS) * p
        code = self.code
        if code < bound:
            r = bound
            probs[ctx] = p + ((PROB_ONE - p) >> ADAPT_SHIFT)
            bit = 0
        else:
            code -= bound
            r -= bound
            probs[ctx] = p - (p >> ADAPT_SHIFT)
            bit = 1
        while r < TOP:
            code = (code << 8) | self._byte()
            r <<= 8
        self.range = r
        self.code = code
        return bit

    def decode_bypass(self, nbits: int) -> int:
        value = 0
        code = self.code
        while nbits > 0:
            k = nbits if nbits <= 12 else 12
            nbits -= k
            r = self.range >> k
            v = code // r
            top = (1 << k) - 1
            if v > top:
                v = top
            code -= v * r
            while r < TOP:
                code = (code << 8) | self._byte()
                r <<= 8
            self.range = r
            value = (value << k) | v
        self.code = code
        return value


class RawEncoder:
    """Plain bit packer with the BinaryEncoder interface (contexts ignored)."""

    __slots__ = ("_acc", "_nbits", "_out")

    def __init__(self, n_contexts: int = 0):
        self._acc = 0
        self._nbits = 0
        self._out = bytearray()

    def encode_bit(self, ctx: int, bit: int):
        self.encode_bypass(bit & 1, 1)

    def encode_bypass(self, value: int, nbits: int):
        acc = (self._acc << nbits) | (value & ((1 << nbits) - 1))
        nb = self._nbits + nbits
        out = self._out
        while nb >= 8:
            nb -= 8
            out.append((acc >> nb) & 0xFF)
        self._acc = acc & ((1 << nb) - 1)
        self._nbits = nb

    def finish(self) -> bytes:
        if self._nbits:
            self._out.append((self._acc << (8 - self._nbits)) & 0xFF)
            self._acc = 0
            self._nbits = 0
        return bytes(self._out)


class RawDecoder:
    __slots__ = ("_data", "_pos", "_acc", "_nbits")

    def __init__(self, data: bytes, n_contexts: int = 0):
        self._data = data
        self._pos = 0
        self._acc = 0
        self._nbits = 0

    def decode_bit(self, ctx: int) -> int:
        return self.decode_bypass(1)

    def decode_bypass(self, nbits: int) -> int:
        acc = self._acc
        nb = self._nbits
        data = self._data
        pos = self._pos
        while nb < nbits:
            if pos >= len(data):
                raise TruncatedStreamError("raw bit stream ended early")
            acc = (acc << 8) | data[pos]
            pos += 1
            nb += 8
        self._pos = pos
        nb -= nbits
        self._nbits = nb
        self._acc = acc & ((1 << nb) - 1)
        return (acc >> nb) & ((1 << nbits) - 1)


def put_eg_ctx(enc, value: int, ctx: int):
    """Exp-Golomb order 0 with context-coded prefix and bypass suffix."""
    m = value + 1
    q = m.bit_length() - 1
    for _ in range(q):
        enc.encode_bit(ctx, 0)
    enc.encode_bit(ctx, 1)
    if q:
        enc.encode_bypass(m & ((1 << q) - 1), q)


def get_eg_ctx(dec, ctx: int) -> int:
    q = 0
    while dec.decode_bit(ctx) == 0:
        q += 1
        if q > 32:
            raise CorruptSegmentError("runaway Exp-Golomb prefix")
    rest = dec.decode_bypass(q) if q else 0
    return ((1 << q) | rest) - 1


def put_eg_bypass(enc, value: int, k: int):
    """Exp-Golomb order k, entirely bypass.

    Bypass batching must pair call-for-call with the decoder, so the unary
    prefix goes out as single bits and only the suffix is batched.
    """
    m = value + (1 << k)
    q = m.bit_length() - 1
    for _ in range(q - k):
        enc.encode_bypass(0, 1)
    enc.encode_bypass(1, 1)
    if q:
        enc.encode_bypass(m & ((1 << q) - 1), q)


def get_eg_bypass(dec, k: int) -> int:
    q = k
    while dec.decode_bypass(1) == 0:
        q += 1
        if q > 40:
            raise CorruptSegmentError("runaway Exp-Golomb prefix")
    rest = dec.decode_bypass(q) if q else 0
    return ((1 << q) | rest) - (1 << k)


def put_eg_k_ctx(enc, value: int, k: int, ctx: int):
    """Exp-Golomb order k with context-coded prefix bins and bypass suffix."""
    m = value + (1 << k)
    q = m.bit_length() - 1
    for _ in range(q - k):
        enc.encode_bit(ctx, 0)
    enc.encode_bit(ctx, 1)
    if q:
        enc.encode_bypass(m & ((1 << q) - 1), q)


def get_eg_k_ctx(dec, k: int, ctx: int) -> int:
    q = k
    while dec.decode_bit(ctx) == 0:
        q += 1
        if q > 40:
            raise CorruptSegmentError("runaway Exp-Golomb prefix")
    rest = dec.decode_bypass(q) if q else 0
    return ((1 << q) | rest) - (1 << k)


def entropy_encode(bits, context_ids=None, n_contexts: int = 1) -> bytes:
    """Encode a 0/1 symbol stream; a 4-byte count header makes it self-framing."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    enc = BinaryEncoder(n_contexts)
    encode_bit = enc.encode_bit
    if context_ids is None:
        for b in bits.tolist():
            encode_bit(0, b)
    else:
        ctxs = np.asarray(context_ids, dtype=np.int64).reshape(-1)
        if ctxs.size != bits.size:
            raise ValueError("context_ids length must match the symbol count")
        for c, b in zip(ctxs.tolist(), bits.tolist()):
            encode_bit(c, b)
    return struct.pack("<I", bits.size) + enc.finish()


def entropy_decode(data: bytes, context_ids=None, n_contexts: int = 1) -> np.ndarray:
    """Exact inverse of entropy_encode."""
    if len(data) < 4:
        raise TruncatedStreamError("missing symbol count header")
    (count,) = struct.unpack_from("<I", data, 0)
    dec = BinaryDecoder(data[4:], n_contexts)
    decode_bit = dec.decode_bit
    out = np.empty(count, dtype=np.uint8)
    if context_ids is None:
        for i in range(count):
            out[i] = decode_bit(0)
    else:
        ctxs = np.asarray(context_ids, dtype=np.int64).reshape(-1)
        if ctxs.size != count:
            raise ValueError("context_ids length must match the symbol count")
        for i, c in enumerate(ctxs.tolist()):
            out[i] = decode_bit(c)
    return out
