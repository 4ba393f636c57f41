"""Codec configuration and frame types."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

BLOCK_SIZES = (4, 8, 16, 32, 64)
MAX_FRAME_SIDE = (1 << 16) - 1


@dataclass(frozen=True)
class CodecConfig:
    """Stage toggles and knobs for the intra-only frame codec.

    There is no inter-frame toggle: frames are always coded independently,
    so inter-frame prediction cannot exist in this codec.
    """

    ctu_size: int = 64
    min_block: int = 8
    qp: int = 32
    enable_prediction: bool = True
    enable_transform: bool = True
    enable_entropy: bool = True
    lambda_scale: float = 1.0

    def __post_init__(self):
        if self.ctu_size not in BLOCK_SIZES:
            raise ValueError(f"ctu_size {self.ctu_size} not a supported block size")
        if self.min_block not in BLOCK_SIZES or self.min_block > self.ctu_size:
            raise ValueError(f"min_block {self.min_block} invalid for ctu {self.ctu_size}")
        if not 0 <= self.qp <= 51:
            raise ValueError(f"qp {self.qp} outside [0, 51]")
        if not self.lambda_scale > 0:
            raise ValueError("lambda_scale must be positive")

    def with_qp(self, qp: int) -> "CodecConfig":
        return replace(self, qp=qp)

    def stage_set(self) -> tuple:
        names = []
        if self.enable_entropy:
            names.append("entropy")
        if self.enable_transform:
            names.append("transform")
        if self.enable_prediction:
            names.append("prediction")
        return tuple(names)

    def rd_lambda(self) -> float:
        return self.lambda_scale * 0.57 * 2.0 ** ((self.qp - 12) / 3.0)


@dataclass(frozen=True, eq=False)
class Frame:
    """A single 8-bit luma frame."""

    width: int
    height: int
    samples: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        if not 1 <= self.width <= MAX_FRAME_SIDE or not 1 <= self.height <= MAX_FRAME_SIDE:
            raise ValueError(f"frame side out of range: {self.width}x{self.height}")
        samples = np.ascontiguousarray(self.samples, dtype=np.uint8)
        if samples.shape != (self.height, self.width):
            raise ValueError(
                f"samples shape {samples.shape} != {(self.height, self.width)}"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
