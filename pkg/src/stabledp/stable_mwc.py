"""Randomized divide-and-conquer solver for the maximum weight chain problem.

The solver trades a (1 - delta) factor of the optimum for stability: at each
recursion step it draws a pivot from the centrally-located pool ``U_d`` with
probability proportional to ``exp(r(v) / c)`` (the exponential mechanism over
best-chain-through-v weights) and recurses on the predecessor and successor
sides of the pivot.  The scale ``c``, the pool threshold ``d``, and the
mechanism strength ``eps`` are each drawn from short uniform intervals rather
than fixed, which is what keeps the output distribution insensitive to
deleting one potentially-missing set.

All logarithms in the solver are natural logarithms.

Besides the solver this module computes the *exact* pivot marginal (the law
of the first pivot with ``c`` and ``d`` integrated out) and the average
total-variation distance of pivot marginals under deletions, used to verify
the stability analysis numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _bits
from ._rng import SplitStream, as_stream
from .dag_core import (
    AntichainFamily,
    ChainSolution,
    SubUniverse,
    TransitiveDag,
    _r_table,
    _side_counts,
)
from .errors import CentralVertexViolation, DegenerateDeletion, EmptySupport

__all__ = [
    "RecParams",
    "PivotDistribution",
    "PivotRecord",
    "RecursionTrace",
    "StableSolverConfig",
    "exp_mechanism_probs",
    "exp_mechanism_sample",
    "rec",
    "mwc",
    "sample_eps",
    "pivot_marginal",
    "average_pivot_tv",
    "pivot_tv_bound",
    "recursion_depth_bound",
]

_QUAD_NODES = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_QUAD_NODES)


@dataclass(frozen=True)
class RecParams:
    """Parameters drawn by one recursion step."""

    eps: float
    c: float
    d: float


@dataclass(frozen=True)
class PivotDistribution:
    """Exact law of the pivot over a universe (zero off the pivot pool)."""

    support: tuple[int, ...]
    probabilities: np.ndarray

    def as_dict(self) -> dict[int, float]:
        return {v: float(p) for v, p in zip(self.support, self.probabilities)}


@dataclass(frozen=True)
class PivotRecord:
    depth: int
    universe_size: int
    pool_size: int
    opt: float
    pivot: int
    r_pivot: float
    params: RecParams


@dataclass
class RecursionTrace:
    """Optional per-run log of the recursion tree.

    ``max_depth`` counts the empty leaf calls; universes are recorded (as
    bitset masks, per depth) only when ``record_universes`` is set.
    """

    record_universes: bool = False
    eps: float | None = None
    records: list[PivotRecord] = field(default_factory=list)
    universe_masks: list[list[np.ndarray]] = field(default_factory=list)
    max_depth: int = 0

    def _note_depth(self, depth: int) -> None:
        self.max_depth = max(self.max_depth, depth)

    def _note_universe(self, depth: int, mask: np.ndarray) -> None:
        if not self.record_universes:
            return
        while len(self.universe_masks) <= depth:
            self.universe_masks.append([])
        self.universe_masks[depth].append(mask.copy())

    def universes_at(self, depth: int) -> list[np.ndarray]:
        """Vertex-id arrays of the universes visited at one depth."""
        if depth >= len(self.universe_masks):
            return []
        return [_bits.mask_to_indices(m) for m in self.universe_masks[depth]]

    def intersecting_counts(self, family: AntichainFamily) -> list[list[int]]:
        """n_U for every recorded universe, by depth."""
        return [
            [family.intersecting_count(m) for m in level] for level in self.universe_masks
        ]


@dataclass(frozen=True)
class StableSolverConfig:
    """Top-level solver knobs: target slack delta and the run seed."""

    delta: float
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def recursion_depth_bound(m: int) -> int:
    """ceil(log_{4/3} m) + 1; every run stays within this depth."""
    if m <= 1:
        return 1
    return math.ceil(math.log(m) / math.log(4.0 / 3.0)) + 1


# ---------------------------------------------------------------------------
# exponential mechanism


def _softmax(scores: np.ndarray, c: float) -> np.ndarray:
    """Probabilities proportional to exp(scores / c), max-shifted.

    ``c == 0`` is the opt(U) = 0 degenerate case where every score is zero;
    the limit distribution is uniform.
    """
    k = scores.shape[0]
    if c <= 0.0:
        return np.full(k, 1.0 / k)
    z = np.exp((scores - scores.max()) / c)
    return z / z.sum()


def exp_mechanism_probs(scores: Mapping[int, float], c: float) -> PivotDistribution:
    """Exact selection probabilities of the exponential mechanism."""
    if not scores:
        raise EmptySupport("exponential mechanism needs a nonempty score table")
    if c <= 0.0:
        raise ValueError("scale c must be positive")
    support = tuple(sorted(scores))
    vals = np.array([scores[v] for v in support], dtype=np.float64)
    return PivotDistribution(support, _softmax(vals, c))


def exp_mechanism_sample(scores: Mapping[int, float], c: float, rng: SplitStream) -> int:
    """Draw one item with probability proportional to exp(score / c).

    Overflow-free for any finite scores (the exponentials are max-shifted).
    """
    dist = exp_mechanism_probs(scores, c)
    return dist.support[_pick(dist.probabilities, rng.uniform())]


def _pick(probs: np.ndarray, u: float) -> int:
    cum = np.cumsum(probs)
    j = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return min(j, probs.shape[0] - 1)


# ---------------------------------------------------------------------------
# the solver


def _scale_interval(eps: float, opt: float, k: int) -> float:
    """Lower end B of the interval [B, 2B] the scale c is drawn from."""
    return eps * opt / math.log(k / eps)


def rec(
    dag: TransitiveDag,
    universe: SubUniverse,
    eps: float,
    rng: SplitStream,
    trace: RecursionTrace | None = None,
    validate: bool = False,
) -> ChainSolution:
    """One fixed-eps recursion pass; deterministic given the stream key.

    Each call draws (c, d, pivot) from its own stream and hands independent
    child streams to the two subcalls, so results do not depend on
    evaluation order.  ``validate`` asserts the central-vertex identity
    max_{v in U_d} r(v) = opt(U) at every visited (U, d).
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    picked = _rec(dag, universe.mask, eps, rng, trace, validate, 0)
    picked.sort(key=lambda v: dag.topo_rank[v])
    total = float(sum(float(dag.weights[v]) for v in picked))
    return ChainSolution(vertices=tuple(picked), total_weight=total)


def _rec(
    dag: TransitiveDag,
    mask: np.ndarray,
    eps: float,
    stream: SplitStream,
    trace: RecursionTrace | None,
    validate: bool,
    depth: int,
) -> list[int]:
    if trace is not None:
        trace._note_depth(depth)
    idx = _bits.mask_to_indices(mask)
    k = idx.shape[0]
    if k == 0:
        return []
    if trace is not None:
        trace._note_universe(depth, mask)

    _, r, opt = _r_table(dag, mask)
    pred_n, succ_n = _side_counts(dag, mask)

    u_c = stream.uniform()
    u_d = stream.uniform()
    u_p = stream.uniform()

    if opt > 0.0:
        b = _scale_interval(eps, opt, k)
        c = b * (1.0 + u_c)
    else:
        c = 0.0
    d = 0.5 * k + u_d * (0.25 * k)

    side = np.maximum(pred_n[idx], succ_n[idx])
    pool = idx[side <= d]
    if validate:
        r_best = float(r[pool].max())
        if not math.isclose(r_best, opt, rel_tol=1e-9, abs_tol=1e-12):
            raise CentralVertexViolation(
                f"max r over pivot pool {r_best} != opt {opt} at |U|={k}, d={d}"
            )

    probs = _softmax(r[pool], c)
    pivot = int(pool[_pick(probs, u_p)])

    if trace is not None:
        trace.records.append(
            PivotRecord(
                depth=depth,
                universe_size=k,
                pool_size=int(pool.shape[0]),
                opt=opt,
                pivot=pivot,
                r_pivot=float(r[pivot]),
                params=RecParams(eps=eps, c=c, d=d),
            )
        )

    left = dag.pred_bits[pivot] & mask
    right = dag.succ_bits[pivot] & mask
    out = _rec(dag, left, eps, stream.child(1), trace, validate, depth + 1)
    out.append(pivot)
    out.extend(_rec(dag, right, eps, stream.child(2), trace, validate, depth + 1))
    return out


def sample_eps(m: int, delta: float, stream: SplitStream) -> float:
    """Draw eps with 1/eps uniform on [17 ln(m)/delta, 34 ln(m)/delta].

    For m < 2 the interval degenerates (ln 1 = 0); any eps gives the same
    single-vertex run, so a fixed placeholder is used.
    """
    u = stream.uniform()
    if m < 2:
        return 0.5
    inv_lo = 17.0 * math.log(m) / delta
    return 1.0 / (inv_lo * (1.0 + u))


def mwc(
    dag: TransitiveDag,
    config: StableSolverConfig,
    rng: SplitStream | int | None = None,
    trace: RecursionTrace | None = None,
    validate: bool = False,
) -> ChainSolution:
    """Full stable solver: sample eps once, then run the recursion on V.

    The expected output weight is at least (1 - delta) * opt(V).
    """
    stream = as_stream(rng, default_seed=config.seed)
    if dag.m == 0:
        return ChainSolution(vertices=(), total_weight=0.0)
    if trace is None and config.record_trace:
        trace = RecursionTrace()
    eps = sample_eps(dag.m, config.delta, stream)
    if trace is not None:
        trace.eps = eps
    return rec(dag, dag.full_universe(), eps, stream.child(1), trace, validate)


# ---------------------------------------------------------------------------
# exact pivot marginal and its deletion sensitivity


def pivot_marginal(dag: TransitiveDag, universe: SubUniverse, eps: float) -> PivotDistribution:
    """Exact law of the pivot of ``rec`` on this universe.

    The threshold d is integrated exactly: U_d is a step function of d whose
    pieces are delimited by the integer side counts, so the marginal is a
    finite mixture of fixed-pool conditionals.  Within a piece the scale c
    is integrated by 64-node Gauss-Legendre quadrature on [B, 2B], which is
    far below the 1e-6 tolerance the verification suite uses.
    """
    idx = universe.indices()
    k = idx.shape[0]
    if k == 0:
        raise EmptySupport("pivot marginal of an empty universe")
    _, r, opt = _r_table(dag, universe.mask)
    pred_n, succ_n = _side_counts(dag, universe.mask)
    side = np.maximum(pred_n[idx], succ_n[idx])

    lo, hi = 0.5 * k, 0.75 * k
    cuts = sorted({float(s) for s in side if lo < s < hi})
    bounds = [lo, *cuts, hi]

    out = np.zeros(k, dtype=np.float64)
    for a, b in zip(bounds, bounds[1:]):
        pool = side <= a
        if not pool.any():
            continue
        weight = (b - a) / (hi - lo)
        out[pool] += weight * _c_integrated_softmax(r[idx[pool]], opt, eps, k)
    return PivotDistribution(tuple(int(v) for v in idx), out)


def _c_integrated_softmax(scores: np.ndarray, opt: float, eps: float, k: int) -> np.ndarray:
    """(1/B) * integral over [B, 2B] of softmax_c(scores) dc."""
    if opt <= 0.0:
        return np.full(scores.shape[0], 1.0 / scores.shape[0])
    b = _scale_interval(eps, opt, k)
    nodes = b * (1.5 + 0.5 * _GL_X)
    shifted = scores - scores.max()
    z = np.exp(shifted[None, :] / nodes[:, None])
    per_node = z / z.sum(axis=1, keepdims=True)
    return 0.5 * (_GL_W @ per_node)


def _marginal_on_parent(dag: TransitiveDag, universe: SubUniverse, eps: float) -> np.ndarray:
    dist = pivot_marginal(dag, universe, eps)
    full = np.zeros(dag.m, dtype=np.float64)
    full[list(dist.support)] = dist.probabilities
    return full


def average_pivot_tv(dag: TransitiveDag, family: AntichainFamily, eps: float) -> float:
    """(1/n) * sum_i TV(pivot law on V, pivot law on V minus S_i), exactly.

    A deletion that empties the vertex set contributes TV = 1 and raises a
    :class:`DegenerateDeletion` warning.
    """
    base = _marginal_on_parent(dag, dag.full_universe(), eps)
    total = 0.0
    for i in range(family.n):
        deleted = family.deleted_universe(i)
        if deleted.size == 0:
            warnings.warn(
                f"deleting set {i} empties the vertex set; TV taken as 1",
                DegenerateDeletion,
            )
            total += 1.0
            continue
        total += 0.5 * float(
            np.abs(base - _marginal_on_parent(dag, deleted, eps)).sum()
        )
    return total / family.n


def pivot_tv_bound(dag: TransitiveDag, family: AntichainFamily, eps: float) -> float:
    """(1/n) * 3 K eps^-1 ln(|V| eps^-1): the proven ceiling for eps <= 0.05."""
    k = family.multiplicity_bound
    return 3.0 * k / eps * math.log(dag.m / eps) / family.n
