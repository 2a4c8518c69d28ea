"""Packed-bitset helpers.

Vertex sets are stored as little-endian numpy ``uint64`` arrays of shape
``(W,)`` with ``W = ceil(m / 64)``; adjacency closures as ``(m, W)``
matrices.  All hot loops live in :mod:`stabledp._kernels`.
"""

from __future__ import annotations

import numpy as np

WORD = 64
_ONE = np.uint64(1)


def word_count(m: int) -> int:
    return (m + WORD - 1) // WORD


def empty_mask(m: int) -> np.ndarray:
    return np.zeros(word_count(m), dtype=np.uint64)


def full_mask(m: int) -> np.ndarray:
    mask = np.full(word_count(m), ~np.uint64(0), dtype=np.uint64)
    tail = m % WORD
    if mask.size and tail:
        mask[-1] = (_ONE << np.uint64(tail)) - _ONE
    return mask


def mask_from_indices(indices, m: int) -> np.ndarray:
    mask = empty_mask(m)
    for i in indices:
        if not 0 <= i < m:
            raise IndexError(f"vertex {i} out of range for m={m}")
        mask[i >> 6] |= _ONE << np.uint64(i & 63)
    return mask


def mask_to_indices(mask: np.ndarray) -> np.ndarray:
    """Sorted vertex ids of the set bits."""
    if mask.size == 0:
        return np.empty(0, dtype=np.int64)
    bits = np.unpackbits(mask.view(np.uint8), bitorder="little")
    return np.nonzero(bits)[0].astype(np.int64)


def popcount(mask: np.ndarray) -> int:
    return int(np.bitwise_count(mask).sum())


def test_bit(mask: np.ndarray, i: int) -> bool:
    return bool((mask[i >> 6] >> np.uint64(i & 63)) & _ONE)


def set_bit(mask: np.ndarray, i: int) -> None:
    mask[i >> 6] |= _ONE << np.uint64(i & 63)
