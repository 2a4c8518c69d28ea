"""Pseudoknot-free folding reduced to maximum weight chain.

The folding problem asks for a maximum set of non-crossing index pairs
(l, r) with (A_l, A_r) in a pairing relation.  Its textbook cubic DP
(`nussinov_opt`) maximizes over *sums* of two table entries, which a chain
problem cannot express directly.  The reduction here goes through the pair
forest of a solution: vertices of the chain graph are lists of
pseudo-interval triples (I, H, L), each triple recording a light edge
(I, L) of a heavy-light decomposition together with I's heavy child H.
Root-to-node paths carry at most log2(n) light edges, so the graph has
quasi-polynomially many vertices while chains still map onto solutions
weight-for-weight.

String positions are 1-based here (0 and n + 1 are the virtual boundary),
matching the usual sequence-coordinate convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import _bits
from ._rng import SplitStream, as_stream
from .dag_core import AntichainFamily, ChainSolution, build_transitive_dag
from .errors import (
    DuplicateIndex,
    IncomparableTriples,
    InfeasibleChain,
    InstanceTooLarge,
    ParseError,
)
from .reductions import Reduction
from .stable_mwc import StableSolverConfig, mwc

__all__ = [
    "RnaInstance",
    "PseudoInterval",
    "Triple",
    "FoldSolution",
    "PairTree",
    "DEFAULT_RNA_CAP",
    "nussinov_opt",
    "nussinov_solution",
    "is_pseudoknot_free",
    "strictly_inside",
    "is_well_ordered",
    "enumerate_well_ordered_triples",
    "triple_preceq",
    "vertex_lex_lt",
    "build_rna_graph",
    "chain_to_pairs",
    "build_pair_tree",
    "make_chain",
    "max_list_length",
    "rna_fold",
    "crossing_index_count",
    "delete_letter",
    "lift_pairs",
    "instance_from_json",
    "instance_to_json",
    "solution_to_json",
]

DEFAULT_RNA_CAP = 14

# a pseudo-interval is an inclusive integer interval or the empty set
PseudoInterval = "tuple[int, int] | None"
FoldSolution = frozenset


class Triple(NamedTuple):
    """A well-ordered pseudo-interval triple (I, H, L); L may be None."""

    I: tuple[int, int]
    H: tuple[int, int]
    L: tuple[int, int] | None


@dataclass(frozen=True)
class RnaInstance:
    string: str
    relation: frozenset

    problem = "rna"

    @property
    def n(self) -> int:
        return len(self.string)

    def matches(self, l: int, r: int) -> bool:
        """Whether positions l, r (1-based) may pair."""
        return (self.string[l - 1], self.string[r - 1]) in self.relation


def strictly_inside(inner, outer: tuple[int, int]) -> bool:
    """inner is contained in outer and avoids both of outer's endpoints.

    The empty pseudo-interval is strictly inside everything.
    """
    if inner is None:
        return True
    return outer[0] < inner[0] and inner[1] < outer[1]


def _disjoint(a, b) -> bool:
    if a is None or b is None:
        return True
    return a[1] < b[0] or b[1] < a[0]


def is_well_ordered(triple: Triple) -> bool:
    """Conditions: I, H nonempty non-degenerate; H, L strictly inside I; H, L disjoint."""
    i, h, l = triple
    if i is None or not i[0] < i[1]:
        return False
    if h is None or not h[0] < h[1]:
        return False
    if not (strictly_inside(h, i) and strictly_inside(l, i)):
        return False
    return _disjoint(h, l)


def enumerate_well_ordered_triples(n: int) -> list[Triple]:
    """All well-ordered triples with I inside [0, n+1] and H, L inside [1, n].

    Pairing-relation constraints are not applied here; this enumerates the
    raw domain of the order, which is what the order-axiom checks quantify
    over.  Single-point L intervals are included (the order handles them),
    although graph vertices never carry them.
    """
    out = []
    intervals = [(a, b) for a in range(0, n + 2) for b in range(a + 1, n + 2)]
    inner = [(a, b) for a in range(1, n + 1) for b in range(a, n + 1)]
    for i in intervals:
        hs = [h for h in inner if h[0] < h[1] and strictly_inside(h, i)]
        ls = [None] + [l for l in inner if strictly_inside(l, i)]
        for h in hs:
            for l in ls:
                t = Triple(i, h, l)
                if is_well_ordered(t):
                    out.append(t)
    return out


def triple_preceq(t1: Triple, t2: Triple) -> bool:
    """The partial order on triples: equal, or I' inside H, or same (I, H)
    with L empty, or same (I, H) with L entirely left of L'."""
    if t1 == t2:
        return True
    if t2.I[0] >= t1.H[0] and t2.I[1] <= t1.H[1]:
        return True
    if t1.I == t2.I and t1.H == t2.H:
        if t1.L is None:
            return True
        if t2.L is not None and t1.L[1] < t2.L[0]:
            return True
    return False


def _lex_compare(v1: Sequence[Triple], v2: Sequence[Triple]) -> bool | None:
    """True if v1 < v2, False if not; None when the first differing triples
    are order-incomparable (no edge either way)."""
    for t1, t2 in zip(v1, v2):
        if t1 != t2:
            le = triple_preceq(t1, t2)
            ge = triple_preceq(t2, t1)
            if le:
                return True
            if ge:
                return False
            return None
    return len(v1) < len(v2)


def vertex_lex_lt(v1: Sequence[Triple], v2: Sequence[Triple]) -> bool:
    """Strict lexicographic order on triple lists (prefixes come first)."""
    res = _lex_compare(tuple(v1), tuple(v2))
    if res is None:
        raise IncomparableTriples(f"lists differ at incomparable triples: {v1} vs {v2}")
    return res


# ---------------------------------------------------------------------------
# oracles


def is_pseudoknot_free(pairs: Iterable[tuple[int, int]]) -> bool:
    """Whether no two pairs cross (exactly one endpoint inside the other)."""
    ps = list(pairs)
    seen = set()
    for l, r in ps:
        for x in (l, r):
            if x in seen:
                raise DuplicateIndex(f"index {x} used twice")
            seen.add(x)
    for a in range(len(ps)):
        l1, r1 = ps[a]
        for b in range(a + 1, len(ps)):
            l2, r2 = ps[b]
            if (l1 < l2 < r1) != (l1 < r2 < r1):
                return False
    return True


def nussinov_opt(instance: RnaInstance) -> int:
    """Exact optimal pair count by the cubic split-point DP."""
    n = instance.n
    if n < 2:
        return 0
    dp = [[0] * (n + 2) for _ in range(n + 2)]
    for span in range(2, n + 1):
        for i in range(1, n - span + 2):
            j = i + span - 1
            best = max(dp[i][k] + dp[k + 1][j] for k in range(i, j))
            if instance.matches(i, j):
                best = max(best, dp[i + 1][j - 1] + 1)
            dp[i][j] = best
    return dp[1][n]


def nussinov_solution(instance: RnaInstance) -> tuple[int, FoldSolution]:
    """Optimal count plus one optimal pair set, backtracked from the table."""
    n = instance.n
    if n < 2:
        return 0, frozenset()
    dp = [[0] * (n + 2) for _ in range(n + 2)]
    for span in range(2, n + 1):
        for i in range(1, n - span + 2):
            j = i + span - 1
            best = max(dp[i][k] + dp[k + 1][j] for k in range(i, j))
            if instance.matches(i, j):
                best = max(best, dp[i + 1][j - 1] + 1)
            dp[i][j] = best
    pairs = set()

    def back(i: int, j: int) -> None:
        if j <= i:
            return
        if instance.matches(i, j) and dp[i][j] == dp[i + 1][j - 1] + 1:
            pairs.add((i, j))
            back(i + 1, j - 1)
            return
        for k in range(i, j):
            if dp[i][j] == dp[i][k] + dp[k + 1][j]:
                back(i, k)
                back(k + 1, j)
                return

    back(1, n)
    return dp[1][n], frozenset(pairs)


# ---------------------------------------------------------------------------
# graph construction


def _matchable_pairs(instance: RnaInstance) -> list[tuple[int, int]]:
    n = instance.n
    return [
        (l, r)
        for l in range(1, n + 1)
        for r in range(l + 1, n + 1)
        if instance.matches(l, r)
    ]


def _instance_triples(instance: RnaInstance) -> list[Triple]:
    """Well-ordered triples whose H (and nonempty L) are matchable pairs."""
    n = instance.n
    pairs = _matchable_pairs(instance)
    out = []
    for li in range(0, n + 2):
        for ri in range(li + 1, n + 2):
            i = (li, ri)
            hs = [h for h in pairs if strictly_inside(h, i)]
            for h in hs:
                out.append(Triple(i, h, None))
                for l in pairs:
                    if strictly_inside(l, i) and _disjoint(h, l):
                        out.append(Triple(i, h, l))
    return out


def _triple_sort_key(t: Triple):
    return (t.I, t.H, t.L if t.L is not None else (-1, -1))


def max_list_length(b: float) -> int:
    """Vertex lists have integer length, so 'length at most B' means floor(B)."""
    return int(math.floor(b))


def build_rna_graph(
    instance: RnaInstance, b: float, cap: int = DEFAULT_RNA_CAP
) -> Reduction:
    """The chain graph over triple lists of length at most ``b``.

    Vertices carry unit weight; edges follow the strict lexicographic order
    on lists, so the graph is transitive and acyclic by construction.  The
    potentially-missing set S_i collects the vertices having position i as
    an endpoint of any component pseudo-interval; these are pseudo-
    antichains, not antichains, hence the relaxed family mode.
    """
    n = instance.n
    if n > cap:
        raise InstanceTooLarge(f"n={n} exceeds RNA desk cap {cap}")
    if b < 1:
        raise ValueError("list length bound B must be at least 1")
    triples = _instance_triples(instance)
    max_len = max_list_length(b)

    by_container: dict[tuple[int, int], list[Triple]] = {}
    for t in triples:
        by_container.setdefault(t.I, []).append(t)

    labels: list[tuple[Triple, ...]] = []

    def extend(prefix: list[Triple], last_l) -> None:
        if prefix:
            labels.append(tuple(prefix))
        if len(prefix) >= max_len or (prefix and last_l is None):
            return
        if not prefix:
            candidates = triples
        else:
            candidates = [
                t
                for i_key, ts in by_container.items()
                if last_l[0] <= i_key[0] and i_key[1] <= last_l[1]
                for t in ts
            ]
        for t in candidates:
            prefix.append(t)
            extend(prefix, t.L)
            prefix.pop()

    extend([], None)
    labels.sort(key=lambda v: (len(v), [_triple_sort_key(t) for t in v]))

    m = len(labels)
    edges = []
    for i in range(m):
        vi = labels[i]
        for j in range(m):
            if i != j and _lex_compare(vi, labels[j]) is True:
                edges.append((i, j))
    dag = build_transitive_dag([1.0] * m, edges)

    sets = [
        [
            v
            for v, lab in enumerate(labels)
            if any(
                pos in (t.I[0], t.I[1], t.H[0], t.H[1], *(t.L if t.L else ()))
                for t in lab
            )
        ]
        for pos in range(1, n + 1)
    ]
    if m:
        membership = [0] * m
        for s in sets:
            for v in s:
                membership[v] += 1
        k_bound = max(membership)
    else:
        k_bound = 1
    family = AntichainFamily.build(dag, sets, max(1, k_bound), antichain_mode=False)

    label_tuple = tuple(labels)

    def decode(chain: ChainSolution) -> FoldSolution:
        return chain_to_pairs([label_tuple[v] for v in chain.vertices], instance)

    return Reduction(instance, dag, family, label_tuple, decode)


def _vertex_pair(v: Sequence[Triple]) -> tuple[int, int]:
    """The pair a vertex matches: its last triple's L, or H when L is empty."""
    last = v[-1]
    return last.L if last.L is not None else last.H


def chain_to_pairs(
    chain: Sequence[Sequence[Triple]], instance: RnaInstance | None = None
) -> FoldSolution:
    """Decode a chain of triple lists into its pair set, validating feasibility."""
    pairs = [_vertex_pair(tuple(v)) for v in chain]
    if len(set(pairs)) != len(pairs):
        raise InfeasibleChain("chain decodes to duplicate pairs")
    try:
        ok = is_pseudoknot_free(pairs)
    except DuplicateIndex as exc:
        raise InfeasibleChain(str(exc)) from exc
    if not ok:
        raise InfeasibleChain("chain decodes to crossing pairs")
    if instance is not None:
        for l, r in pairs:
            if not instance.matches(l, r):
                raise InfeasibleChain(f"pair ({l}, {r}) not allowed by the relation")
    return frozenset(pairs)


# ---------------------------------------------------------------------------
# pair forests and the chain construction


@dataclass(frozen=True)
class PairTree:
    """Nesting forest of a solution, rooted at the boundary pair (0, n+1).

    ``children`` lists each node's children sorted by left endpoint;
    ``heavy`` maps each internal node to its largest-subtree child (ties go
    to the smallest left endpoint).
    """

    root: tuple[int, int]
    children: Mapping
    heavy: Mapping

    def nodes(self) -> list[tuple[int, int]]:
        out = [self.root]
        stack = [self.root]
        while stack:
            for c in self.children[stack.pop()]:
                out.append(c)
                stack.append(c)
        return out


def build_pair_tree(solution: Iterable[tuple[int, int]], n: int) -> PairTree:
    """Nest the pairs of a feasible solution under the virtual root (0, n+1)."""
    pairs = sorted(set(tuple(p) for p in solution))
    root = (0, n + 1)
    children = {root: []}
    for p in pairs:
        children[p] = []
    for p in pairs:
        enclosing = [q for q in pairs if q != p and q[0] < p[0] and p[1] < q[1]]
        parent = min(enclosing, key=lambda q: q[1] - q[0]) if enclosing else root
        children[parent].append(p)
    for v in children:
        children[v].sort()

    sizes: dict[tuple[int, int], int] = {}

    def size(v) -> int:
        if v not in sizes:
            sizes[v] = 1 + sum(size(c) for c in children[v])
        return sizes[v]

    heavy = {}
    for v, ch in children.items():
        if ch:
            heavy[v] = max(ch, key=lambda c: (size(c), -c[0]))
    return PairTree(root=root, children=children, heavy=heavy)


def make_chain(tree: PairTree) -> list[tuple[Triple, ...]]:
    """The canonical chain whose decode is exactly the tree's pair set.

    Pre-order traversal with light children first (ascending left endpoint),
    then the heavy child; each emitted list extends the stack of light edges
    on the path from the root, so list lengths never exceed log2(n).
    """
    chain: list[tuple[Triple, ...]] = []
    current: list[Triple] = []

    def dfs(node: tuple[int, int]) -> None:
        ch = tree.children[node]
        if not ch:
            return
        h = tree.heavy[node]
        current.append(Triple(node, h, None))
        chain.append(tuple(current))
        current.pop()
        for light in ch:
            if light == h:
                continue
            current.append(Triple(node, h, light))
            chain.append(tuple(current))
            dfs(light)
            current.pop()
        dfs(h)

    dfs(tree.root)
    return chain


# ---------------------------------------------------------------------------
# the full folding pipeline


def sample_length_bound(n: int, stream: SplitStream) -> float:
    """Draw B uniformly from [log2 n, 2 log2 n].

    Base 2 matches the subtree-halving argument that bounds list lengths,
    and keeps B >= 1 for every n >= 2.
    """
    lo = math.log2(n)
    return lo * (1.0 + stream.uniform())


@lru_cache(maxsize=64)
def _cached_graph(instance: RnaInstance, max_len: int, cap: int) -> Reduction:
    # the graph depends on B only through floor(B), so repeated folding runs
    # share a handful of builds
    return build_rna_graph(instance, float(max_len), cap=cap)


def rna_fold(
    instance: RnaInstance,
    delta: float,
    rng: SplitStream | int | None = None,
    cap: int = DEFAULT_RNA_CAP,
) -> FoldSolution:
    """Stable folding: sample B, build the graph, run the chain solver, decode."""
    stream = as_stream(rng)
    n = instance.n
    if n > cap:
        raise InstanceTooLarge(f"n={n} exceeds RNA desk cap {cap}")
    if n < 2:
        return frozenset()
    b = sample_length_bound(n, stream)
    reduction = _cached_graph(instance, max_list_length(b), cap)
    config = StableSolverConfig(delta=delta, seed=0)
    chain = mwc(reduction.dag, config, rng=stream.child(1))
    return reduction.decode(chain)


def crossing_index_count(reduction: Reduction, vertex: int) -> int:
    """Number of positions i whose S_i meets both reach sides of the vertex.

    Counts i with V_{-v} and V_{+v} both intersecting S_i while v itself is
    outside S_i; at most 6B for every vertex of an RNA graph.
    """
    dag = reduction.dag
    family = reduction.family
    count = 0
    for i in range(family.n):
        smask = family.masks[i]
        if _bits.test_bit(smask, vertex):
            continue
        if np.any(dag.pred_bits[vertex] & smask) and np.any(dag.succ_bits[vertex] & smask):
            count += 1
    return count


# ---------------------------------------------------------------------------
# deletions and JSON codecs


def delete_letter(instance: RnaInstance, position: int) -> RnaInstance:
    """The instance with the letter at ``position`` (1-based) removed."""
    if not 1 <= position <= instance.n:
        raise IndexError(f"position {position} out of range")
    s = instance.string
    return RnaInstance(s[: position - 1] + s[position:], instance.relation)


def lift_pairs(position: int, pairs: FoldSolution) -> FoldSolution:
    """Map deleted-instance pairs back to original coordinates (canonical shift)."""
    return frozenset(
        (l if l < position else l + 1, r if r < position else r + 1) for l, r in pairs
    )


def instance_to_json(instance: RnaInstance) -> dict:
    return {
        "problem": "rna",
        "string": instance.string,
        "relation": sorted([a, b] for a, b in instance.relation),
    }


def instance_from_json(obj: Mapping | str) -> RnaInstance:
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    try:
        if obj["problem"] != "rna":
            raise ParseError(f"expected an rna instance, got {obj['problem']!r}")
        return RnaInstance(
            str(obj["string"]),
            frozenset((str(a), str(b)) for a, b in obj["relation"]),
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed rna instance: {exc}") from exc


def solution_to_json(solution: FoldSolution) -> dict:
    return {"pairs": sorted([l, r] for l, r in solution)}
