"""Builds the checked-in reference artifacts for format-stability tests.

Regenerate (only when the formats intentionally change) with:
    python -m tests.golden_tools
"""

from pathlib import Path

from vcodec.codec import CodecConfig, encode_container
from vcodec.quant import rtn_quantize
from vcodec.quant import default_scheme_for
from vcodec.tensor import gen_synthetic, tensor_to_bytes

GOLDEN_DIR = Path(__file__).parent / "golden"
SEED = 777
CONFIG = CodecConfig(qp=24)
FRAME_SIDE = 64


def reference_tensor():
    return gen_synthetic(96, 96, 0.9, 0.01, 10.0, seed=SEED)


def reference_bytes():
    t = reference_tensor()
    vctn = tensor_to_bytes(t)
    q = rtn_quantize(t, default_scheme_for(t))
    vcbs = encode_container(q, CONFIG, frame_side=FRAME_SIDE)
    return vctn, vcbs


def write_golden():
    GOLDEN_DIR.mkdir(exist_ok=True)
    vctn, vcbs = reference_bytes()
    (GOLDEN_DIR / "reference.vctn").write_bytes(vctn)
    (GOLDEN_DIR / "reference.vcbs").write_bytes(vcbs)
    print(f"wrote {len(vctn)}-byte tensor and {len(vcbs)}-byte bitstream to {GOLDEN_DIR}")


if __name__ == "__main__":
    write_golden()
