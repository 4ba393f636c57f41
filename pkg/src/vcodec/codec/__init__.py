from .config import CodecConfig, Frame
from .dct import dct2, idct2
from .entropy import entropy_decode, entropy_encode
from .frame_codec import decode_frame, encode_frame
from .predict import MODE_NAMES, predict_block
from .quantizer import dequantize_coeffs, qp_step, quantize_coeffs
from .bitstream import (
    Bitstream,
    TileGrid,
    decode_container,
    encode_container,
    frames_from_plane,
    reassemble_plane,
)

__all__ = [
    "CodecConfig",
    "Frame",
    "dct2",
    "idct2",
    "entropy_encode",
    "entropy_decode",
    "encode_frame",
    "decode_frame",
    "MODE_NAMES",
    "predict_block",
    "qp_step",
    "quantize_coeffs",
    "dequantize_coeffs",
    "Bitstream",
    "TileGrid",
    "encode_container",
    "decode_container",
    "frames_from_plane",
    "reassemble_plane",
]
