"""Rate control: qp search to quality or size targets, stage ablation, and
per-tensor bit allocation.

All bits-per-value figures count full container bytes (headers included)
against the original element count; MSE is measured in the original value
space after stage-1 dequantization and codec decode.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .codec import CodecConfig, decode_container
from .codec.bitstream import encode_container_with_recon
from .errors import InfeasibleError
from .quant import QuantScheme, default_scheme_for, dequantize_plane, rtn_quantize
from .tensor import Tensor

QP_MAX = 51
_SCAN_WINDOW = 3  # linear safety scan around the binary-search result

STAGE_SETS = (
    ("baseline", None),
    ("entropy", dict(enable_prediction=False, enable_transform=False, enable_entropy=True)),
    ("entropy+transform", dict(enable_prediction=False, enable_transform=True, enable_entropy=True)),
    (
        "entropy+transform+prediction",
        dict(enable_prediction=True, enable_transform=True, enable_entropy=True),
    ),
)


@dataclass(frozen=True)
class RateReport:
    tensor_id: str
    stage_set: str
    qp: int | None
    bits_per_value: float
    mse: float
    bytes: int
    floor: bool = False


@dataclass(frozen=True)
class AllocationPlan:
    """Per-tensor real-valued bit targets whose weighted mean hits the global one."""

    targets: tuple
    global_average: float
    qps: tuple
    total_weighted_mse: float
    uniform_weighted_mse: float


class _RD:
    """Caches (container bytes, value-space MSE) per qp for one coding plane.

    MSE sums squared error over the working plane but divides by
    element_count, so padded working planes still report against the
    original tensor size (orthogonal rotations keep the two equal).
    """

    def __init__(self, q, ref_plane, element_count: int, config: CodecConfig, frame_side: int, ext=None):
        self.q = q
        self.ref = np.asarray(ref_plane, dtype=np.float64)
        self.element_count = element_count
        self.config = config
        self.frame_side = frame_side
        self.ext = ext
        self._cache: dict = {}

    @classmethod
    def from_tensor(cls, t: Tensor, config: CodecConfig, scheme: QuantScheme | None, frame_side: int):
        q = rtn_quantize(t, scheme or default_scheme_for(t))
        return cls(q, t.plane(), t.element_count, config, frame_side)

    def eval(self, qp: int):
        hit = self._cache.get(qp)
        if hit is None:
            data, recon_codes = encode_container_with_recon(
                self.q, self.config.with_qp(qp), frame_side=self.frame_side, ext=self.ext
            )
            rec = dequantize_plane(self.q, recon_codes).astype(np.float64)
            mse = float(np.sum((rec - self.ref) ** 2)) / self.element_count
            hit = (data, mse)
            self._cache[qp] = hit
        return hit

    def bits(self, qp: int) -> float:
        data, _ = self.eval(qp)
        return 8.0 * len(data) / self.element_count

    def mse(self, qp: int) -> float:
        return self.eval(qp)[1]

    def stage1_mse(self) -> float:
        rec = dequantize_plane(self.q).astype(np.float64)
        return float(np.sum((rec - self.ref) ** 2)) / self.element_count


def _search_mse_qp(rd: _RD, target_mse: float):
    """(qp, floor_flag) for the largest qp meeting the MSE target."""
    if rd.mse(0) > target_mse:
        return 0, True
    lo, hi = 0, QP_MAX
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if rd.mse(mid) <= target_mse:
            lo = mid
        else:
            hi = mid - 1
    best = lo
    for qp in range(lo + 1, min(QP_MAX, lo + _SCAN_WINDOW) + 1):
        if rd.mse(qp) <= target_mse:
            best = qp
    return best, False


def _search_bits_qp(rd: _RD, target_bits: float) -> int:
    lo, hi = 0, QP_MAX
    while lo < hi:
        mid = (lo + hi) // 2
        if rd.bits(mid) <= target_bits:
            hi = mid
        else:
            lo = mid + 1
    best = lo
    if lo > 0 and abs(rd.bits(lo - 1) - target_bits) < abs(rd.bits(lo) - target_bits):
        best = lo - 1
    return best


def _report(rd: _RD, qp: int, tensor_id: str, floor: bool = False, verify: bool = True) -> RateReport:
    data, mse = rd.eval(qp)
    if verify:
        q2, _ = decode_container(data)
        rec = dequantize_plane(rd.q, q2.codes).astype(np.float64)
        mse = float(np.sum((rec - rd.ref) ** 2)) / rd.element_count
    return RateReport(
        tensor_id,
        "+".join(rd.config.stage_set()) or "none",
        qp,
        8.0 * len(data) / rd.element_count,
        mse,
        len(data),
        floor,
    )


def search_qp_for_mse(
    t: Tensor,
    target_mse: float,
    config: CodecConfig | None = None,
    scheme: QuantScheme | None = None,
    frame_side: int = 1024,
    tensor_id: str = "t0",
    verify: bool = True,
) -> RateReport:
    """Largest qp (fewest bits) whose end-to-end MSE meets the target.

    Binary search exploits rate monotonicity; a +-3 linear scan guards
    against local non-monotonicity. If even qp=0 misses the target the
    stage-1 floor is reported with the floor flag set.
    """
    if not target_mse > 0:
        raise ValueError("target_mse must be positive")
    rd = _RD.from_tensor(t, config or CodecConfig(), scheme, frame_side)
    qp, floor = _search_mse_qp(rd, target_mse)
    return _report(rd, qp, tensor_id, floor=floor, verify=verify)


def search_qp_for_bits(
    t: Tensor,
    target_bits: float,
    config: CodecConfig | None = None,
    scheme: QuantScheme | None = None,
    frame_side: int = 1024,
    tensor_id: str = "t0",
    verify: bool = True,
) -> RateReport:
    """qp whose achieved bits-per-value is closest to the target."""
    if target_bits < 0.1:
        raise InfeasibleError(f"bits target {target_bits} below 0.1 bits/value")
    rd = _RD.from_tensor(t, config or CodecConfig(), scheme, frame_side)
    return _report(rd, _search_bits_qp(rd, target_bits), tensor_id, verify=verify)


def ablation_report(
    t: Tensor,
    target_mse: float,
    config: CodecConfig | None = None,
    scheme: QuantScheme | None = None,
    frame_side: int = 1024,
    tensor_id: str = "t0",
) -> list:
    """Bits at fixed quality as codec stages are enabled incrementally.

    Rows, in order: uncoded 8-bit baseline (exactly 8.0 bits), +entropy,
    +transform, +prediction.
    """
    base_cfg = config or CodecConfig()
    reports = []
    for name, toggles in STAGE_SETS:
        if toggles is None:
            rd = _RD.from_tensor(t, base_cfg, scheme, frame_side)
            reports.append(
                RateReport(tensor_id, name, None, 8.0, rd.stage1_mse(), t.element_count)
            )
            continue
        cfg = replace(base_cfg, **toggles)
        rep = search_qp_for_mse(
            t, target_mse, cfg, scheme, frame_side, tensor_id=tensor_id, verify=False
        )
        reports.append(replace(rep, stage_set=name))
    return reports


def allocate_bits(
    tensors: list,
    global_target_bits: float,
    config: CodecConfig | None = None,
    scheme: QuantScheme | None = None,
    frame_side: int = 1024,
    max_rounds: int = 200,
) -> AllocationPlan:
    """Greedy marginal-utility split of a global bit budget across tensors.

    Starts every tensor at the uniform qp meeting the budget, then moves one
    qp step of bits from the tensor that loses least to the tensor that gains
    most, while total size-weighted MSE keeps dropping. Per-tensor targets
    are the realized rates rescaled so their weighted mean equals the budget.
    """
    if not tensors:
        raise ValueError("allocate_bits needs at least one tensor")
    if global_target_bits < 0.1:
        raise InfeasibleError(f"target {global_target_bits} below 0.1 bits/value")
    if global_target_bits > 8.0:
        raise InfeasibleError(f"target {global_target_bits} above the 8-bit input rate")
    cfg = config or CodecConfig()
    rds = [_RD.from_tensor(t, cfg, scheme, frame_side) for t in tensors]
    counts = np.array([t.element_count for t in tensors], dtype=np.float64)
    total = counts.sum()

    def avg_bits(qps):
        return float(sum(c * rd.bits(qp) for c, rd, qp in zip(counts, rds, qps)) / total)

    def weighted_sse(qps):
        return float(sum(c * rd.mse(qp) for c, rd, qp in zip(counts, rds, qps)))

    # Uniform start: smallest qp whose corpus average fits the budget.
    lo, hi = 0, QP_MAX
    while lo < hi:
        mid = (lo + hi) // 2
        if avg_bits([mid] * len(rds)) <= global_target_bits:
            hi = mid
        else:
            lo = mid + 1
    qps = [lo] * len(rds)
    uniform_sse = weighted_sse(qps)

    band = 0.25  # realized averages move in qp-sized steps; targets are rescaled after
    current = uniform_sse
    for _ in range(max_rounds):
        best_move = None
        for i in range(len(rds)):  # receiver: one qp finer
            if qps[i] == 0:
                continue
            for j in range(len(rds)):  # donor: one qp coarser
                if i == j or qps[j] == QP_MAX:
                    continue
                trial = list(qps)
                trial[i] -= 1
                trial[j] += 1
                if abs(avg_bits(trial) - global_target_bits) > band:
                    continue
                sse = weighted_sse(trial)
                if sse < current - 1e-12 and (best_move is None or sse < best_move[0]):
                    best_move = (sse, trial)
        if best_move is None:
            break
        current, qps = best_move
    realized = np.array([rd.bits(qp) for rd, qp in zip(rds, qps)])
    avg = float(np.dot(counts, realized) / total)
    targets = realized * (global_target_bits / avg)
    return AllocationPlan(
        tuple(float(x) for x in targets),
        float(np.dot(counts, targets) / total),
        tuple(qps),
        current,
        uniform_sse,
    )


def reports_to_rows(reports) -> list:
    rows = []
    for r in reports:
        rows.append(
            {
                "tensor_id": r.tensor_id,
                "stage_set": r.stage_set,
                "qp": "" if r.qp is None else r.qp,
                "bits_per_value": float(f"{r.bits_per_value:.6f}"),
                "mse": float(f"{r.mse:.10g}"),
                "bytes": r.bytes,
            }
        )
    return rows


_COLUMNS = ("tensor_id", "stage_set", "qp", "bits_per_value", "mse", "bytes")


def write_reports_csv(reports, path, command: str = "") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# vcodec {__version__} | {command}\n")
        writer = csv.DictWriter(fh, fieldnames=_COLUMNS)
        writer.writeheader()
        writer.writerows(reports_to_rows(reports))


def write_reports_json(reports, path, command: str = "") -> None:
    doc = {
        "meta": {"tool": "vcodec", "version": __version__, "command": command},
        "reports": reports_to_rows(reports),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
