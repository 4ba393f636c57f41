"""vcodec: data-independent tensor compression on an intra-only codec pipeline."""

__version__ = "0.1.0"

from .quant import QuantScheme, QuantizedPlane, rtn_dequantize, rtn_quantize
from .rotation import IncoherenceRotation, apply_incoherence_pair, make_rotation
from .tensor import (
    ErrorMetrics,
    Tensor,
    error_metrics,
    gen_synthetic,
    load_tensor,
    save_tensor,
)

__all__ = [
    "__version__",
    "Tensor",
    "ErrorMetrics",
    "error_metrics",
    "gen_synthetic",
    "load_tensor",
    "save_tensor",
    "QuantScheme",
    "QuantizedPlane",
    "rtn_quantize",
    "rtn_dequantize",
    "IncoherenceRotation",
    "make_rotation",
    "apply_incoherence_pair",
]
