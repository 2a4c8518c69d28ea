"""Numba kernels for the bitset chain dynamic programs.

These are the only hot loops in the package: reach-closure construction and
the forward/backward max-weight-chain tables evaluated inside a vertex
subset.  Everything operates on little-endian packed ``uint64`` bitsets.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_U1 = np.uint64(1)
_U6 = np.uint64(63)


@njit(cache=True, inline="always")
def _lowbit_index(word: np.uint64) -> np.int64:
    return np.int64(np.log2(np.float64(word & (~word + _U1))))


@njit(cache=True)
def closure_from_direct(direct: np.ndarray, topo: np.ndarray) -> np.ndarray:
    """Transitive closure of a DAG given direct successor bitsets.

    ``topo`` must list vertices in topological order.  Processing vertices
    in reverse topological order guarantees every OR merges a finished row;
    successors already present in the row are skipped because their closure
    was merged through an earlier OR.
    """
    m, W = direct.shape
    clo = np.zeros((m, W), dtype=np.uint64)
    for idx in range(m - 1, -1, -1):
        v = topo[idx]
        for wi in range(W):
            word = direct[v, wi]
            while word:
                u = (wi << 6) + _lowbit_index(word)
                word &= word - _U1
                if not (clo[v, u >> 6] >> np.uint64(u & 63)) & _U1:
                    clo[v, u >> 6] |= _U1 << np.uint64(u & 63)
                    for t in range(W):
                        clo[v, t] |= clo[u, t]
    return clo


@njit(cache=True)
def chain_dp(
    pred_bits: np.ndarray,
    weights: np.ndarray,
    universe: np.ndarray,
    topo: np.ndarray,
) -> np.ndarray:
    """Max weight of a chain inside ``universe`` ending at each vertex.

    Entries outside the universe are set to -1 (weights are nonnegative, so
    the sentinel cannot collide with a real value).  Passing closure
    successors and a reversed ``topo`` yields the chains-starting-at table.
    """
    m, W = pred_bits.shape
    f = np.empty(m, dtype=np.float64)
    for t in range(m):
        v = topo[t]
        if not (universe[v >> 6] >> np.uint64(v & 63)) & _U1:
            f[v] = -1.0
            continue
        best = 0.0
        for wi in range(W):
            word = pred_bits[v, wi] & universe[wi]
            while word:
                u = (wi << 6) + _lowbit_index(word)
                word &= word - _U1
                if f[u] > best:
                    best = f[u]
        f[v] = best + weights[v]
    return f


@njit(cache=True)
def best_pred(
    pred_bits: np.ndarray,
    universe: np.ndarray,
    f: np.ndarray,
    v: np.int64,
) -> np.int64:
    """Predecessor of ``v`` inside the universe with maximal f, smallest id on ties."""
    W = pred_bits.shape[1]
    arg = np.int64(-1)
    best = -1.0
    for wi in range(W):
        word = pred_bits[v, wi] & universe[wi]
        while word:
            u = (wi << 6) + _lowbit_index(word)
            word &= word - _U1
            if f[u] > best:
                best = f[u]
                arg = u
    return arg


def warmup() -> None:
    """Force JIT compilation of all kernels (used by tests and the CLI)."""
    direct = np.zeros((1, 1), dtype=np.uint64)
    topo = np.zeros(1, dtype=np.int64)
    closure_from_direct(direct, topo)
    w = np.zeros(1, dtype=np.float64)
    uni = np.ones(1, dtype=np.uint64)
    f = chain_dp(direct, w, uni, topo)
    best_pred(direct, uni, f, np.int64(0))
