"""Uniform dead-zone quantizer for transform coefficients.

The step doubles every 6 qp units; the rounding offset of 1/3 widens the
zero bin, biasing small coefficients toward zero.
"""

from __future__ import annotations

import numpy as np

DEAD_ZONE = 1.0 / 3.0


def qp_step(qp: int) -> float:
    if not 0 <= qp <= 51:
        raise ValueError(f"qp {qp} outside [0, 51]")
    return 2.0 ** ((qp - 4) / 6.0)


def quantize_coeffs(coeffs: np.ndarray, qp: int) -> np.ndarray:
    """level = sign(c) * floor(|c| / step + 1/3), as int32."""
    step = qp_step(qp)
    c = np.asarray(coeffs, dtype=np.float64)
    mags = np.floor(np.abs(c) / step + DEAD_ZONE)
    return (np.sign(c) * mags).astype(np.int32)


def dequantize_coeffs(levels: np.ndarray, qp: int) -> np.ndarray:
    step = qp_step(qp)
    return np.asarray(levels, dtype=np.float64) * step
