"""Vertex-weighted transitive DAGs, antichain families, and exact chain optima.

The solver in :mod:`stabledp.stable_mwc` consumes three per-universe
quantities computed here: the reach partition (the predecessors and
successors of a vertex inside the universe), the table ``r(v)`` of best
chain weights through each vertex, and the pivot pool ``U_d`` of vertices
whose reach sides both have at most ``d`` vertices.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _bits, _kernels
from .errors import BadIndex, CycleDetected

__all__ = [
    "TransitiveDag",
    "SubUniverse",
    "ChainSolution",
    "AntichainFamily",
    "build_transitive_dag",
    "opt_chain",
    "reach_partition",
    "r_values",
    "u_d_set",
    "sum_opt_drop",
    "load_dag_instance",
    "dump_dag_instance",
]


@dataclass(frozen=True)
class ChainSolution:
    """A chain (pairwise comparable vertex set) listed in topological order."""

    vertices: tuple[int, ...]
    total_weight: float

    def __len__(self) -> int:
        return len(self.vertices)

    def as_set(self) -> frozenset[int]:
        return frozenset(self.vertices)


class TransitiveDag:
    """Immutable transitive DAG with per-vertex reachability bitsets.

    ``succ_bits[v]`` / ``pred_bits[v]`` hold the full closure, so
    ``U_{+v}`` and ``U_{-v}`` queries are single AND operations.  Instances
    are safe to share across threads and processes.
    """

    __slots__ = ("weights", "succ_bits", "pred_bits", "topo", "topo_rank", "m", "words")

    def __init__(self, weights: np.ndarray, succ_bits: np.ndarray, topo: np.ndarray):
        self.weights = weights
        self.succ_bits = succ_bits
        self.topo = topo
        self.m = int(weights.shape[0])
        self.words = succ_bits.shape[1] if self.m else 0
        rank = np.empty(self.m, dtype=np.int64)
        rank[topo] = np.arange(self.m)
        self.topo_rank = rank
        if self.m:
            bits = np.unpackbits(succ_bits.view(np.uint8), bitorder="little", axis=1)
            pred = np.zeros_like(bits)
            pred[:, : self.m] = bits[:, : self.m].T
            self.pred_bits = np.packbits(pred, bitorder="little", axis=1).view(np.uint64)
        else:
            self.pred_bits = np.zeros((0, 0), dtype=np.uint64)

    def has_edge(self, u: int, v: int) -> bool:
        self._check_vertex(u)
        self._check_vertex(v)
        return _bits.test_bit(self.succ_bits[u], v)

    def successors(self, v: int) -> np.ndarray:
        self._check_vertex(v)
        return _bits.mask_to_indices(self.succ_bits[v])

    def predecessors(self, v: int) -> np.ndarray:
        self._check_vertex(v)
        return _bits.mask_to_indices(self.pred_bits[v])

    def edge_count(self) -> int:
        return int(np.bitwise_count(self.succ_bits).sum()) if self.m else 0

    def full_universe(self) -> "SubUniverse":
        return SubUniverse(self, _bits.full_mask(self.m))

    def universe_of(self, vertices: Iterable[int]) -> "SubUniverse":
        return SubUniverse(self, _bits.mask_from_indices(vertices, self.m))

    def universe_without(self, vertices: Iterable[int]) -> "SubUniverse":
        mask = _bits.full_mask(self.m)
        for v in vertices:
            self._check_vertex(v)
            mask[v >> 6] &= ~(np.uint64(1) << np.uint64(v & 63))
        return SubUniverse(self, mask)

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.m:
            raise BadIndex(f"vertex {v} out of range for m={self.m}")


@dataclass(frozen=True)
class SubUniverse:
    """A vertex subset viewed inside its parent DAG (cheap value object)."""

    parent: TransitiveDag
    mask: np.ndarray

    @property
    def size(self) -> int:
        return _bits.popcount(self.mask)

    @property
    def members(self) -> frozenset[int]:
        return frozenset(int(i) for i in self.indices())

    def indices(self) -> np.ndarray:
        return _bits.mask_to_indices(self.mask)

    def contains(self, v: int) -> bool:
        self.parent._check_vertex(v)
        return _bits.test_bit(self.mask, v)

    def without(self, vertices: Iterable[int]) -> "SubUniverse":
        mask = self.mask.copy()
        for v in vertices:
            self.parent._check_vertex(v)
            mask[v >> 6] &= ~(np.uint64(1) << np.uint64(v & 63))
        return SubUniverse(self.parent, mask)

    def intersect_mask(self, other_mask: np.ndarray) -> "SubUniverse":
        return SubUniverse(self.parent, self.mask & other_mask)


def build_transitive_dag(
    vertex_weights: Sequence[float], edges: Iterable[tuple[int, int]]
) -> TransitiveDag:
    """Build the transitive closure of the given vertex-weighted relation.

    The input relation may be any generator relation; the constructor closes
    it.  Raises :class:`CycleDetected` on a directed cycle (self-loops
    included) and :class:`BadIndex` on out-of-range endpoints.  Weights must
    be nonnegative and finite.
    """
    weights = np.asarray(vertex_weights, dtype=np.float64)
    if weights.ndim != 1:
        raise ValueError("vertex_weights must be a flat sequence")
    if weights.size and (not np.all(np.isfinite(weights)) or np.any(weights < 0)):
        raise ValueError("weights must be finite and nonnegative")
    m = weights.shape[0]
    direct = np.zeros((m, _bits.word_count(m)), dtype=np.uint64)
    indeg = np.zeros(m, dtype=np.int64)
    for u, v in edges:
        if not (0 <= u < m and 0 <= v < m):
            raise BadIndex(f"edge ({u}, {v}) out of range for m={m}")
        if u == v:
            raise CycleDetected(f"self-loop at vertex {u}")
        if not _bits.test_bit(direct[u], v):
            _bits.set_bit(direct[u], v)
            indeg[v] += 1

    topo = _toposort(direct, indeg)
    if m:
        closure = _kernels.closure_from_direct(direct, topo)
    else:
        closure = direct
    return TransitiveDag(weights, closure, topo)


def _toposort(direct: np.ndarray, indeg: np.ndarray) -> np.ndarray:
    """Kahn's algorithm taking the smallest available vertex id first."""
    m = direct.shape[0]
    indeg = indeg.copy()
    heap = [int(v) for v in range(m) if indeg[v] == 0]
    heapq.heapify(heap)
    topo = np.empty(m, dtype=np.int64)
    k = 0
    while heap:
        v = heapq.heappop(heap)
        topo[k] = v
        k += 1
        for u in _bits.mask_to_indices(direct[v]):
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, int(u))
    if k != m:
        raise CycleDetected("input edge relation has a directed cycle")
    return topo


# ---------------------------------------------------------------------------
# per-universe tables


def _forward_table(dag: TransitiveDag, mask: np.ndarray) -> np.ndarray:
    """f[v] = max weight of a chain inside the universe ending at v."""
    return _kernels.chain_dp(dag.pred_bits, dag.weights, mask, dag.topo)


def _backward_table(dag: TransitiveDag, mask: np.ndarray) -> np.ndarray:
    """g[v] = max weight of a chain inside the universe starting at v."""
    return _kernels.chain_dp(dag.succ_bits, dag.weights, mask, dag.topo[::-1].copy())


def _r_table(dag: TransitiveDag, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """(f, r, opt) for the universe; r[v] = f[v] + g[v] - w(v), -1 outside."""
    f = _forward_table(dag, mask)
    g = _backward_table(dag, mask)
    inside = f >= 0.0
    r = np.where(inside, f + g - dag.weights, -1.0)
    opt = float(f.max(initial=0.0, where=inside)) if dag.m else 0.0
    return f, r, opt


def _side_counts(dag: TransitiveDag, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(|U_{-v}|, |U_{+v}|) for every vertex (junk outside the universe)."""
    pred_n = np.bitwise_count(dag.pred_bits & mask[None, :]).sum(axis=1).astype(np.int64)
    succ_n = np.bitwise_count(dag.succ_bits & mask[None, :]).sum(axis=1).astype(np.int64)
    return pred_n, succ_n


# ---------------------------------------------------------------------------
# public operations


def opt_chain(dag: TransitiveDag, universe: SubUniverse | None = None) -> ChainSolution:
    """Maximum-weight chain inside the universe via the textbook chain DP.

    Ties are broken deterministically: the endpoint is the smallest-id
    vertex attaining the optimum, and each backtrack step takes the
    smallest-id predecessor with maximal table value.
    """
    mask = dag.full_universe().mask if universe is None else universe.mask
    if dag.m == 0 or _bits.popcount(mask) == 0:
        return ChainSolution(vertices=(), total_weight=0.0)
    f = _forward_table(dag, mask)
    inside = f >= 0.0
    best = float(f.max(initial=0.0, where=inside))
    v = int(np.argmax(np.where(inside, f, -1.0)))
    chain = []
    while v >= 0:
        chain.append(v)
        v = int(_kernels.best_pred(dag.pred_bits, mask, f, np.int64(v)))
    chain.reverse()
    return ChainSolution(vertices=tuple(chain), total_weight=best)


def reach_partition(
    dag: TransitiveDag, universe: SubUniverse, v: int
) -> tuple[frozenset[int], frozenset[int]]:
    """(U_{-v}, U_{+v}): universe vertices with an edge to / from ``v``."""
    from .errors import VertexNotInUniverse

    if not universe.contains(v):
        raise VertexNotInUniverse(f"vertex {v} not in universe")
    pred = _bits.mask_to_indices(dag.pred_bits[v] & universe.mask)
    succ = _bits.mask_to_indices(dag.succ_bits[v] & universe.mask)
    return frozenset(int(i) for i in pred), frozenset(int(i) for i in succ)


def r_values(dag: TransitiveDag, universe: SubUniverse) -> dict[int, float]:
    """r(v) = opt(U_{-v}) + w(v) + opt(U_{+v}) for every universe vertex."""
    _, r, _ = _r_table(dag, universe.mask)
    return {int(v): float(r[v]) for v in universe.indices()}


def u_d_set(dag: TransitiveDag, universe: SubUniverse, d: float) -> frozenset[int]:
    """Vertices v in the universe with max(|U_{-v}|, |U_{+v}|) <= d."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    pred_n, succ_n = _side_counts(dag, universe.mask)
    out = [int(v) for v in universe.indices() if max(pred_n[v], succ_n[v]) <= d]
    return frozenset(out)


@dataclass(frozen=True)
class AntichainFamily:
    """The potentially-missing sets S_1..S_n with multiplicity bound K.

    In antichain mode (the default) no set may contain two comparable
    vertices.  The RNA construction produces pseudo-antichains instead and
    passes ``antichain_mode=False``; the membership bounds (every vertex in
    at least one and at most K sets) are enforced either way.
    """

    dag: TransitiveDag
    sets: tuple[frozenset[int], ...]
    multiplicity_bound: int
    antichain_mode: bool = True
    masks: tuple[np.ndarray, ...] = field(repr=False, default=())

    @property
    def n(self) -> int:
        return len(self.sets)

    @staticmethod
    def build(
        dag: TransitiveDag,
        sets: Sequence[Iterable[int]],
        multiplicity_bound: int,
        antichain_mode: bool = True,
    ) -> "AntichainFamily":
        fsets = tuple(frozenset(int(v) for v in s) for s in sets)
        if multiplicity_bound < 1:
            raise ValueError("multiplicity bound K must be a positive integer")
        counts = np.zeros(dag.m, dtype=np.int64)
        for s in fsets:
            for v in s:
                dag._check_vertex(v)
                counts[v] += 1
        if dag.m and (counts.min() < 1 or counts.max() > multiplicity_bound):
            raise ValueError(
                "every vertex must lie in at least one and at most K potentially-missing sets"
            )
        if antichain_mode:
            for idx, s in enumerate(fsets):
                for u in s:
                    joined = dag.succ_bits[u]
                    for v in s:
                        if u != v and _bits.test_bit(joined, v):
                            raise ValueError(f"set {idx} contains comparable vertices {u}, {v}")
        masks = tuple(_bits.mask_from_indices(s, dag.m) for s in fsets)
        return AntichainFamily(dag, fsets, multiplicity_bound, antichain_mode, masks)

    def deleted_universe(self, i: int) -> SubUniverse:
        """The universe V minus S_i."""
        return SubUniverse(self.dag, _bits.full_mask(self.dag.m) & ~self.masks[i])

    def intersecting_count(self, mask: np.ndarray) -> int:
        """n_U: number of sets with nonempty intersection with the masked set."""
        return sum(1 for sm in self.masks if np.any(sm & mask))


def sum_opt_drop(dag: TransitiveDag, family: AntichainFamily) -> float:
    """Sum over i of opt(V) - opt(V \\ S_i); at most K * opt(V)."""
    base = opt_chain(dag).total_weight
    total = 0.0
    for i in range(family.n):
        total += base - opt_chain(dag, family.deleted_universe(i)).total_weight
    return total


# ---------------------------------------------------------------------------
# instance (de)serialization: {"weights": [...], "edges": [[u,v],...],
# "missing_sets": [[...], ...], "K": k}


def load_dag_instance(obj: Mapping | str) -> tuple[TransitiveDag, AntichainFamily]:
    """Parse the JSON instance schema into a dag and its antichain family."""
    from .errors import ParseError

    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    try:
        weights = list(obj["weights"])
        edges = [(int(u), int(v)) for u, v in obj["edges"]]
        sets = [list(map(int, s)) for s in obj["missing_sets"]]
        k = int(obj["K"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed dag instance: {exc}") from exc
    dag = build_transitive_dag(weights, edges)
    family = AntichainFamily.build(dag, sets, k)
    return dag, family


def dump_dag_instance(dag: TransitiveDag, family: AntichainFamily) -> dict:
    edges = [
        [int(u), int(v)] for u in range(dag.m) for v in dag.successors(u)
    ]
    return {
        "weights": [float(w) for w in dag.weights],
        "edges": edges,
        "missing_sets": [sorted(s) for s in family.sets],
        "K": family.multiplicity_bound,
    }
