"""Randomized sign-diagonal Hadamard rotations for outlier spreading.

A rotation is D * H / sqrt(n) with D a random +-1 diagonal and H a Hadamard
matrix. Supported sizes are 2^k, 12 * 2^k, and 20 * 2^k (Sylvester recursion
plus Paley constructions of orders 12 and 20).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _hadamard_pow2(n: int) -> np.ndarray:
    h = np.array([[1]], dtype=np.int64)
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


@lru_cache(maxsize=None)
def _hadamard_paley(n: int) -> np.ndarray:
    q = n - 1  # prime, q = 3 mod 4
    residues = {(i * i) % q for i in range(1, q)}
    chi = np.zeros(q, dtype=np.int64)
    for a in range(1, q):
        chi[a] = 1 if a in residues else -1
    s = np.zeros((n, n), dtype=np.int64)
    s[0, 1:] = 1
    s[1:, 0] = -1
    idx = (np.arange(q)[:, None] - np.arange(q)[None, :]) % q
    s[1:, 1:] = chi[idx]
    return s + np.eye(n, dtype=np.int64)


def _factor(n: int):
    """Split n into (2^k, base) with base in {1, 12, 20}; None if unsupported."""
    if n < 1:
        return None
    for base in (1, 12, 20):
        if n % base == 0:
            k = n // base
            if k & (k - 1) == 0:
                return k, base
    return None


def supported_rotation_size(n: int) -> bool:
    return _factor(n) is not None


def next_supported_size(n: int) -> int:
    m = n
    while not supported_rotation_size(m):
        m += 1
    return m


@lru_cache(maxsize=None)
def hadamard(n: int) -> np.ndarray:
    fac = _factor(n)
    if fac is None:
        raise ValueError(f"no Hadamard construction for size {n}")
    k, base = fac
    h = _hadamard_pow2(k)
    if base != 1:
        h = np.kron(h, _hadamard_paley(base))
    return h


@dataclass(frozen=True, eq=False)
class IncoherenceRotation:
    """Orthogonal rotation P = diag(signs) * H / sqrt(n)."""

    size: int
    signs: np.ndarray  # +-1, length size

    def as_matrix(self) -> np.ndarray:
        h = hadamard(self.size).astype(np.float64)
        return (self.signs[:, None] * h) / np.sqrt(self.size)

    # Factored products avoid materializing P for large sizes.
    def right_apply(self, w: np.ndarray) -> np.ndarray:
        """w @ P"""
        h = hadamard(self.size).astype(np.float64)
        return (np.asarray(w, dtype=np.float64) * self.signs) @ h / np.sqrt(self.size)

    def right_invert(self, w: np.ndarray) -> np.ndarray:
        """w @ P.T"""
        h = hadamard(self.size).astype(np.float64)
        return (np.asarray(w, dtype=np.float64) @ h.T) * self.signs / np.sqrt(self.size)

    def left_t_apply(self, w: np.ndarray) -> np.ndarray:
        """P.T @ w"""
        h = hadamard(self.size).astype(np.float64)
        return h.T @ (np.asarray(w, dtype=np.float64) * self.signs[:, None]) / np.sqrt(self.size)

    def left_t_invert(self, w: np.ndarray) -> np.ndarray:
        """P @ w"""
        h = hadamard(self.size).astype(np.float64)
        return (h @ np.asarray(w, dtype=np.float64)) * self.signs[:, None] / np.sqrt(self.size)


def make_rotation(n: int, seed: int) -> IncoherenceRotation:
    if not supported_rotation_size(n):
        raise ValueError(f"unsupported rotation size {n} (need 2^k, 12*2^k, or 20*2^k)")
    rng = np.random.default_rng(seed)
    signs = rng.integers(0, 2, size=n) * 2 - 1
    return IncoherenceRotation(n, signs.astype(np.int64))


def apply_incoherence_pair(w_out: np.ndarray, w_in: np.ndarray, p: IncoherenceRotation):
    """Rotate a connected weight pair: (w_out @ P, P.T @ w_in).

    The merged product (w_out @ P) @ (P.T @ w_in) equals w_out @ w_in, so the
    rotation can be folded into adjacent weights with no model change.
    """
    w_out = np.asarray(w_out, dtype=np.float64)
    w_in = np.asarray(w_in, dtype=np.float64)
    if w_out.ndim != 2 or w_in.ndim != 2:
        raise ValueError("expected 2D weight matrices")
    if w_out.shape[1] != p.size or w_in.shape[0] != p.size:
        raise ValueError(
            f"rotation size {p.size} does not match pair "
            f"{w_out.shape} x {w_in.shape}"
        )
    return p.right_apply(w_out), p.left_t_apply(w_in)
