import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcodec.quant import (
    QuantScheme,
    default_scheme_for,
    dequantize_plane,
    quantize_plane,
    rtn_dequantize,
    rtn_quantize,
)
from vcodec.tensor import Tensor


def sym(bits=8, gran="per_tensor", **kw):
    return QuantScheme("symmetric_rtn", bits, gran, **kw)


def asym(bits=8, gran="per_tensor", **kw):
    return QuantScheme("asymmetric_minmax", bits, gran, **kw)


class TestSymmetric:
    def test_dyadic_values_reconstruct_exactly(self):
        w = np.array([[1.0, -0.5, 0.25]])
        q = quantize_plane(w, sym())
        assert q.scales[0] == pytest.approx(1.0 / 128)
        back = dequantize_plane(q)
        assert np.array_equal(back, w.astype(np.float32))

    def test_codes_stay_under_2_pow_n(self):
        rng = np.random.default_rng(0)
        w = rng.normal(0, 1, (16, 16))
        w[0, 0] = 5.0
        w[1, 1] = -5.0
        for bits in (2, 4, 8):
            q = quantize_plane(w, sym(bits=bits))
            assert q.codes.max() < (1 << bits)

    def test_all_zero_group_exact_zero(self):
        q = quantize_plane(np.zeros((4, 4)), sym(gran="per_channel", axis=0))
        assert np.all(q.scales == 0.0)
        assert np.all(dequantize_plane(q) == 0.0)
        # zero scale means any code decodes to zero (robust to codec noise)
        noisy = np.full((4, 4), 200, dtype=np.uint8)
        assert np.all(dequantize_plane(q, noisy) == 0.0)

    def test_error_bound_half_step(self):
        rng = np.random.default_rng(1)
        w = rng.normal(0, 1, (8, 128))
        q = quantize_plane(w, sym(gran="per_channel", axis=0))
        err = np.abs(dequantize_plane(q).astype(np.float64) - w)
        bound = np.broadcast_to(q.scales.astype(np.float64)[:, None] / 2, err.shape)
        # the single clamped level at the negative extreme may reach one step
        interior = w > -np.abs(w).max(axis=1, keepdims=True) + bound
        assert np.all(err[interior] <= bound[interior] + 1e-7)
        assert np.all(err <= 2 * bound + 1e-7)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-1e4, 1e4, width=32), min_size=1, max_size=64),
        st.integers(2, 8),
    )
    def test_property_error_bounded_by_step(self, vals, bits):
        w = np.asarray(vals, dtype=np.float64).reshape(1, -1)
        q = quantize_plane(w, sym(bits=bits))
        err = np.abs(dequantize_plane(q).astype(np.float64) - w)
        assert np.all(err <= float(q.scales[0]) * (1 + 1e-5) + 1e-6)
        assert q.codes.max() < (1 << bits)


class TestAsymmetric:
    def test_unit_interval_endpoints(self):
        q = quantize_plane(np.array([[0.0, 1.0]]), asym())
        assert set(q.codes.reshape(-1).tolist()) == {0, 255}
        back = dequantize_plane(q)
        assert np.allclose(back, [[0.0, 1.0]], atol=1e-7)

    def test_constant_group_reconstructs(self):
        for v in (3.25, -3.25, 0.0):
            q = quantize_plane(np.full((2, 2), v), asym())
            assert dequantize_plane(q) == pytest.approx(np.full((2, 2), v), abs=1e-6)

    def test_error_bound_half_scale(self):
        rng = np.random.default_rng(2)
        w = rng.normal(0, 3, (6, 32))
        for bits in (3, 8):
            q = quantize_plane(w, asym(bits=bits, gran="per_channel", axis=0))
            err = np.abs(dequantize_plane(q).astype(np.float64) - w)
            assert np.all(err <= q.scales.astype(np.float64)[:, None] / 2 + 1e-9)


class TestSchemes:
    def test_bits_range_enforced(self):
        for bad in (1, 9):
            with pytest.raises(ValueError):
                QuantScheme("symmetric_rtn", bad, "per_tensor")

    def test_group_size_must_divide(self):
        with pytest.raises(ValueError):
            quantize_plane(np.zeros((2, 10)), sym(gran="per_group", group_size=3))

    def test_per_group_counts(self):
        q = quantize_plane(np.arange(24.0).reshape(2, 12), sym(gran="per_group", group_size=4))
        assert q.scales.size == 6

    def test_per_channel_axis1(self):
        w = np.array([[1.0, 10.0], [2.0, 20.0]])
        q = quantize_plane(w, sym(gran="per_channel", axis=1))
        assert q.scales.size == 2
        assert q.scales[1] == pytest.approx(20.0 / 128)

    def test_tensor_roundtrip_via_plane(self):
        vals = np.linspace(-1, 1, 24, dtype=np.float32)
        t = Tensor((2, 3, 4), 2, "activation", vals)
        q = rtn_quantize(t, default_scheme_for(t))
        back = rtn_dequantize(q)
        assert back.dims == t.dims and back.role == t.role
        assert np.max(np.abs(back.values - t.values)) <= np.max(q.scales)
