"""Transform, coefficient quantizer, and prediction-mode behavior."""

import numpy as np
import pytest

from vcodec.codec import dct2, idct2, dequantize_coeffs, qp_step, quantize_coeffs
from vcodec.codec.predict import MODE_NAMES, predict_block


def reference_dct2(x):
    """Independent direct evaluation of the orthonormal DCT-II definition."""
    n = x.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            au = np.sqrt(1 / n) if u == 0 else np.sqrt(2 / n)
            av = np.sqrt(1 / n) if v == 0 else np.sqrt(2 / n)
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += (
                        x[i, j]
                        * np.cos((2 * i + 1) * u * np.pi / (2 * n))
                        * np.cos((2 * j + 1) * v * np.pi / (2 * n))
                    )
            out[u, v] = au * av * acc
    return out


class TestDct:
    def test_constant_block_dc_only(self):
        y = dct2(np.ones((4, 4)))
        assert y[0, 0] == pytest.approx(4.0, abs=1e-6)
        y[0, 0] = 0.0
        assert np.max(np.abs(y)) < 1e-6

    def test_single_outlier_amortized(self):
        x = np.zeros((4, 4))
        x[0, 0] = 128.0
        y = dct2(x)
        assert y[0, 0] == pytest.approx(32.0, abs=1e-9)
        assert np.max(np.abs(y)) < 128.0
        assert np.linalg.norm(y) == pytest.approx(128.0, abs=1e-3)

    def test_matches_reference_definition(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 1, (4, 4))
        assert np.allclose(dct2(x), reference_dct2(x), atol=1e-10)

    def test_roundtrip(self):
        rng = np.random.default_rng(4)
        x = rng.normal(0, 50, (8, 8))
        assert np.max(np.abs(idct2(dct2(x)) - x)) < 1e-4

    @pytest.mark.parametrize("n", [4, 8, 16, 32, 64])
    def test_energy_preserved(self, n):
        rng = np.random.default_rng(n)
        x = rng.normal(0, 1, (n, n))
        assert np.linalg.norm(dct2(x)) == pytest.approx(np.linalg.norm(x), rel=1e-4)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            dct2(np.zeros((4, 8)))
        with pytest.raises(ValueError):
            dct2(np.zeros((5, 5)))


class TestCoeffQuantizer:
    def test_qp4_unit_step(self):
        assert qp_step(4) == pytest.approx(1.0)
        assert quantize_coeffs(np.array([2.7]), 4)[0] == 3
        assert dequantize_coeffs(np.array([3]), 4)[0] == pytest.approx(3.0)

    def test_doubles_every_six(self):
        assert qp_step(10) == pytest.approx(2.0)
        assert qp_step(16) == pytest.approx(4.0)

    def test_dead_zone(self):
        step = qp_step(20)
        c = np.array([0.66 * step, -0.66 * step, 0.67 * step])
        levels = quantize_coeffs(c, 20)
        assert levels[0] == 0 and levels[1] == 0 and levels[2] == 1

    def test_qp_range(self):
        with pytest.raises(ValueError):
            qp_step(52)
        with pytest.raises(ValueError):
            quantize_coeffs(np.zeros(1), -1)

    def test_sign_symmetry(self):
        c = np.array([5.4, -5.4])
        levels = quantize_coeffs(c, 4)
        assert levels[0] == -levels[1]


class TestPrediction:
    def test_dc_all_hundred(self):
        pred = predict_block([100] * 4, [100] * 4, "dc")
        assert np.all(pred == 100)

    def test_vertical_copies_top(self):
        pred = predict_block([10, 20, 30, 40], None, "vertical")
        assert np.array_equal(pred, np.tile([10, 20, 30, 40], (4, 1)))

    def test_horizontal_copies_left(self):
        pred = predict_block(None, [5, 6, 7, 8], "horizontal")
        assert np.array_equal(pred, np.tile(np.array([[5], [6], [7], [8]]), (1, 4)))

    def test_dc_no_neighbors_border_fill(self):
        pred = predict_block(None, None, "dc", size=4)
        assert np.all(pred == 128)

    def test_dc_single_side_averages_that_side(self):
        pred = predict_block([10, 20, 30, 40], None, "dc")
        assert np.all(pred == 25)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            predict_block([1, 2], [1, 2], "angular_99")
        with pytest.raises(ValueError):
            predict_block([1, 2], [1, 2], 17)

    def test_planar_constant_neighbors(self):
        pred = predict_block([50] * 8, [50] * 8, "planar", size=4)
        assert np.all(pred == 50)

    @pytest.mark.parametrize("mode", MODE_NAMES)
    def test_all_modes_deterministic_and_in_range(self, mode):
        rng = np.random.default_rng(hash(mode) % 2**32)
        top = rng.integers(0, 256, 16)
        left = rng.integers(0, 256, 16)
        a = predict_block(top, left, mode, size=8, corner=77)
        b = predict_block(top, left, mode, size=8, corner=77)
        assert np.array_equal(a, b)
        assert a.dtype == np.uint8
        assert a.shape == (8, 8)

    def test_diag_down_left_uses_extended_top(self):
        top = np.arange(1, 9)
        pred = predict_block(top, None, "diag_down_left", size=4)
        assert pred[0, 0] == top[1]
        assert pred[3, 3] == top[7]
