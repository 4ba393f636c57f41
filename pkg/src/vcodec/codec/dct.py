"""Orthonormal 2D DCT-II over square blocks, plus coefficient scan orders."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .config import BLOCK_SIZES


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis: row k is a_k * cos(pi*(2i+1)*k / 2n)."""
    i = np.arange(n)
    k = np.arange(n)[:, None]
    mat = np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    mat *= np.sqrt(2.0 / n)
    mat[0] *= np.sqrt(0.5)
    mat.setflags(write=False)
    return mat


def _check(block: np.ndarray) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise ValueError(f"expected a square block, got shape {block.shape}")
    if block.shape[0] not in BLOCK_SIZES:
        raise ValueError(f"unsupported block size {block.shape[0]}")
    return block


def dct2(block: np.ndarray) -> np.ndarray:
    """Forward orthonormal 2D DCT-II (energy preserving)."""
    x = _check(block)
    c = dct_matrix(x.shape[0])
    return c @ x @ c.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Exact inverse of dct2."""
    y = _check(coeffs)
    c = dct_matrix(y.shape[0])
    return c.T @ y @ c


@lru_cache(maxsize=None)
def zigzag_order(n: int) -> np.ndarray:
    """Diagonal (up-right) scan of an n x n block as flat indices."""
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    flat_i, flat_j = ii.reshape(-1), jj.reshape(-1)
    order = np.lexsort((flat_j, flat_i + flat_j))
    order.setflags(write=False)
    return order


@lru_cache(maxsize=None)
def zigzag_inverse(n: int) -> np.ndarray:
    inv = np.empty(n * n, dtype=np.int64)
    inv[zigzag_order(n)] = np.arange(n * n)
    inv.setflags(write=False)
    return inv
