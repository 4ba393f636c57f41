import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcodec.codec.entropy import (
    BinaryDecoder,
    BinaryEncoder,
    RawDecoder,
    RawEncoder,
    entropy_decode,
    entropy_encode,
    get_eg_bypass,
    get_eg_ctx,
    put_eg_bypass,
    put_eg_ctx,
)
from vcodec.errors import TruncatedStreamError


class TestRoundtrip:
    @settings(max_examples=80, deadline=None)
    @given(st.binary(min_size=0, max_size=200), st.integers(1, 6))
    def test_any_stream_roundtrips(self, raw, n_ctx):
        bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
        ctxs = np.arange(bits.size) % n_ctx
        data = entropy_encode(bits, ctxs, n_ctx)
        out = entropy_decode(data, ctxs, n_ctx)
        assert np.array_equal(bits, out)

    def test_empty_stream(self):
        data = entropy_encode([])
        assert entropy_decode(data).size == 0

    def test_single_bit(self):
        for b in (0, 1):
            assert entropy_decode(entropy_encode([b])).tolist() == [b]

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(
            st.tuples(st.integers(0, 3), st.integers(0, 1), st.integers(0, (1 << 20) - 1), st.integers(1, 20)),
            min_size=1,
            max_size=300,
        )
    )
    def test_mixed_context_and_bypass(self, ops):
        enc = BinaryEncoder(4)
        for ctx, bit, value, nbits in ops:
            enc.encode_bit(ctx, bit)
            enc.encode_bypass(value & ((1 << nbits) - 1), nbits)
        data = enc.finish()
        dec = BinaryDecoder(data, 4)
        for ctx, bit, value, nbits in ops:
            assert dec.decode_bit(ctx) == bit
            assert dec.decode_bypass(nbits) == value & ((1 << nbits) - 1)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5000), st.integers(0, 6)), min_size=1, max_size=200))
    def test_exp_golomb_helpers(self, pairs):
        enc = BinaryEncoder(2)
        for value, k in pairs:
            put_eg_ctx(enc, value, 0)
            put_eg_bypass(enc, value, k)
        dec = BinaryDecoder(enc.finish(), 2)
        for value, k in pairs:
            assert get_eg_ctx(dec, 0) == value
            assert get_eg_bypass(dec, k) == value


class TestCompression:
    def test_biased_stream_near_shannon(self):
        rng = np.random.default_rng(9)
        n = 10_000
        p1 = 0.05
        bits = (rng.random(n) < p1).astype(np.uint8)
        data = entropy_encode(bits)
        emp = bits.mean()
        shannon = n * (-emp * np.log2(emp) - (1 - emp) * np.log2(1 - emp))
        out_bits = 8 * (len(data) - 4)  # count header excluded
        assert out_bits <= 1.15 * shannon + 128

    def test_uniform_random_incompressible(self):
        rng = np.random.default_rng(10)
        bits = rng.integers(0, 2, 10_000).astype(np.uint8)
        data = entropy_encode(bits)
        assert 8 * len(data) >= 9_900

    def test_constant_stream_tiny(self):
        bits = np.ones(10_000, dtype=np.uint8)
        data = entropy_encode(bits)
        assert len(data) < 100


class TestErrors:
    def test_truncated_raises(self):
        bits = np.ones(1000, dtype=np.uint8)
        data = entropy_encode(bits)
        with pytest.raises(TruncatedStreamError):
            entropy_decode(data[:8])

    def test_short_preamble(self):
        with pytest.raises(TruncatedStreamError):
            entropy_decode(b"\x00\x10")


class TestRawBits:
    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, (1 << 24) - 1), st.integers(1, 24)), max_size=200))
    def test_raw_roundtrip(self, pairs):
        enc = RawEncoder()
        for value, nbits in pairs:
            enc.encode_bypass(value & ((1 << nbits) - 1), nbits)
        dec = RawDecoder(enc.finish())
        for value, nbits in pairs:
            assert dec.decode_bypass(nbits) == value & ((1 << nbits) - 1)

    def test_raw_truncation(self):
        dec = RawDecoder(b"\xff")
        dec.decode_bypass(8)
        with pytest.raises(TruncatedStreamError):
            dec.decode_bypass(1)
