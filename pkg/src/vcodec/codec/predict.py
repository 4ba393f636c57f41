"""Intra prediction: DC, planar, horizontal, vertical, and four diagonal modes.

Predictions read previously reconstructed neighbors; unavailable neighbors
(at frame borders) are filled with 128. DC averages only available sides.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

PLANAR, DC, HORIZONTAL, VERTICAL = 0, 1, 2, 3
DIAG_DOWN_LEFT, DIAG_DOWN_RIGHT, VERT_LEFT, HORZ_UP = 4, 5, 6, 7
MODE_NAMES = (
    "planar",
    "dc",
    "horizontal",
    "vertical",
    "diag_down_left",
    "diag_down_right",
    "vert_left",
    "horz_up",
)
N_MODES = len(MODE_NAMES)
BORDER_FILL = 128


@lru_cache(maxsize=None)
def _gather_indices(n: int):
    """Cached index/coefficient matrices shared by all predictions of size n."""
    y, x = np.mgrid[0:n, 0:n]
    idx = {
        "pl_l": n - 1 - x,
        "pl_r": x + 1,
        "pl_t": n - 1 - y,
        "pl_b": y + 1,
        "dl": x + y + 1,
        "dr": n + x - y,  # into [reversed left, corner, top]
        "vl_a": x + (y + 1) // 2,
        "vl_b": x + (y + 2) // 2,
        "hu_a": y + (x + 1) // 2,
        "hu_b": y + (x + 2) // 2,
    }
    for arr in idx.values():
        arr.setflags(write=False)
    return idx


def _dc_value(top, left, n, avail_top, avail_left) -> int:
    if avail_top and avail_left:
        total = int(top[:n].sum()) + int(left[:n].sum())
        return int(np.floor(total / (2 * n) + 0.5))
    if avail_top:
        return int(np.floor(top[:n].sum() / n + 0.5))
    if avail_left:
        return int(np.floor(left[:n].sum() / n + 0.5))
    return BORDER_FILL


def _fill_mode(out, mode, top, left, corner, n, avail_top, avail_left, idx):
    if mode == PLANAR:
        acc = (
            idx["pl_l"] * left[:n, None]
            + idx["pl_r"] * top[n]
            + idx["pl_t"] * top[None, :n]
            + idx["pl_b"] * left[n]
        )
        out[:] = (acc + n) // (2 * n)
    elif mode == DC:
        out[:] = _dc_value(top, left, n, avail_top, avail_left)
    elif mode == HORIZONTAL:
        out[:] = left[:n, None]
    elif mode == VERTICAL:
        out[:] = top[None, :n]
    elif mode == DIAG_DOWN_LEFT:
        out[:] = top[idx["dl"]]
    elif mode == DIAG_DOWN_RIGHT:
        combined = np.concatenate((left[n - 1 :: -1], (corner,), top[:n]))
        out[:] = combined[idx["dr"]]
    elif mode == VERT_LEFT:
        out[:] = (top[idx["vl_a"]] + top[idx["vl_b"]] + 1) >> 1
    elif mode == HORZ_UP:
        out[:] = (left[idx["hu_a"]] + left[idx["hu_b"]] + 1) >> 1
    else:
        raise ValueError(f"unknown prediction mode {mode!r}")


def predict_single(mode, top, left, corner, n, avail_top, avail_left) -> np.ndarray:
    out = np.empty((n, n), dtype=np.int64)
    _fill_mode(out, mode, top, left, corner, n, avail_top, avail_left, _gather_indices(n))
    return out


def predict_all(top, left, corner, n, avail_top, avail_left) -> np.ndarray:
    """All candidate predictions stacked as (N_MODES, n, n) int64."""
    out = np.empty((N_MODES, n, n), dtype=np.int64)
    idx = _gather_indices(n)
    for mode in range(N_MODES):
        _fill_mode(out[mode], mode, top, left, corner, n, avail_top, avail_left, idx)
    return out


def _extend(refs, n: int) -> np.ndarray:
    """Normalize a neighbor array to length 2n by edge replication."""
    refs = np.asarray(refs, dtype=np.int64).reshape(-1)
    if refs.size == 0:
        return np.full(2 * n, BORDER_FILL, dtype=np.int64)
    if refs.size >= 2 * n:
        return refs[: 2 * n]
    return np.concatenate([refs, np.full(2 * n - refs.size, refs[-1], dtype=np.int64)])


def predict_block(top_neighbors, left_neighbors, mode, size: int | None = None, corner=None):
    """Predict a square block from (possibly missing) neighbor samples.

    `mode` may be an index or one of MODE_NAMES. Missing neighbor sides are
    filled with 128; `size` defaults to the available neighbor length.
    """
    if isinstance(mode, str):
        try:
            mode = MODE_NAMES.index(mode)
        except ValueError:
            raise ValueError(f"unknown prediction mode {mode!r}") from None
    if not 0 <= int(mode) < N_MODES:
        raise ValueError(f"unknown prediction mode {mode!r}")
    avail_top = top_neighbors is not None and np.size(top_neighbors) > 0
    avail_left = left_neighbors is not None and np.size(left_neighbors) > 0
    if size is None:
        if avail_top:
            size = int(np.size(top_neighbors))
        elif avail_left:
            size = int(np.size(left_neighbors))
        else:
            raise ValueError("size is required when no neighbors are given")
    top = _extend(top_neighbors if avail_top else [], size)
    left = _extend(left_neighbors if avail_left else [], size)
    corner = BORDER_FILL if corner is None else int(corner)
    pred = predict_single(int(mode), top, left, corner, size, avail_top, avail_left)
    return np.clip(pred, 0, 255).astype(np.uint8)


def gather_refs(recon: np.ndarray, x: int, y: int, n: int):
    """Collect extended neighbor arrays for the block at (x, y) in a frame buffer."""
    h, w = recon.shape
    avail_top = y > 0
    avail_left = x > 0
    if avail_top:
        top = _extend(recon[y - 1, x : min(x + 2 * n, w)], n)
    else:
        top = np.full(2 * n, BORDER_FILL, dtype=np.int64)
    if avail_left:
        left = _extend(recon[y : min(y + n, h), x - 1], n)
    else:
        left = np.full(2 * n, BORDER_FILL, dtype=np.int64)
    corner = int(recon[y - 1, x - 1]) if (avail_top and avail_left) else BORDER_FILL
    return top, left, corner, avail_top, avail_left
