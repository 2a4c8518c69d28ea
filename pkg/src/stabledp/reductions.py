"""Reductions of five dynamic-programming problems to maximum weight chain.

Each builder returns a :class:`Reduction`: the transitive DAG, the family of
potentially-missing antichains (the DP states that vanish when one input
element is deleted), a weight-preserving decode map from chains back to
problem solutions, and per-vertex labels.  Every feasible solution is the
image of some chain, so the chain optimum equals the problem optimum.

``exact_oracle`` solves each problem with its classical DP and is kept
deliberately independent of the graph path: the two must agree on every
instance, which the test suite checks against brute force as well.

Sequence positions are 0-based throughout this module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .dag_core import AntichainFamily, ChainSolution, TransitiveDag, build_transitive_dag, opt_chain
from .errors import InstanceTooLarge, MalformedInterval, ParseError

__all__ = [
    "LisInstance",
    "IntervalsInstance",
    "LcsInstance",
    "LpsInstance",
    "KnapsackInstance",
    "ProblemInstance",
    "Reduction",
    "lis_graph",
    "interval_graph",
    "lcs_graph",
    "lps_graph",
    "knapsack_graph",
    "build_reduction",
    "exact_oracle",
    "deletion_count",
    "delete_element",
    "lift_solution",
    "instance_from_json",
    "instance_to_json",
    "DEFAULT_PRODUCT_CAP",
]

DEFAULT_PRODUCT_CAP = 10**6


@dataclass(frozen=True)
class LisInstance:
    sequence: tuple[int, ...]

    problem = "lis"


@dataclass(frozen=True)
class IntervalsInstance:
    intervals: tuple[tuple[float, float], ...]
    weights: tuple[float, ...]

    problem = "intervals"

    def __post_init__(self):
        if len(self.intervals) != len(self.weights):
            raise ValueError("one weight per interval required")
        for l, r in self.intervals:
            if not l < r:
                raise MalformedInterval(f"interval [{l}, {r}) is empty")


@dataclass(frozen=True)
class LcsInstance:
    strings: tuple[str, ...]

    problem = "lcs"

    def __post_init__(self):
        if len(self.strings) < 2:
            raise ValueError("LCS needs at least two strings")


@dataclass(frozen=True)
class LpsInstance:
    string: str

    problem = "lps"


@dataclass(frozen=True)
class KnapsackInstance:
    costs: tuple[int, ...]
    weights: tuple[float, ...]
    capacity: int

    problem = "knapsack"

    def __post_init__(self):
        if len(self.costs) != len(self.weights):
            raise ValueError("one weight per item required")
        if any(int(c) != c or c < 1 for c in self.costs):
            raise ValueError("costs must be integers >= 1")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ValueError("capacity must be an integer >= 1")


ProblemInstance = LisInstance | IntervalsInstance | LcsInstance | LpsInstance | KnapsackInstance


@dataclass(frozen=True)
class Reduction:
    """A problem instance compiled to the chain problem."""

    instance: object
    dag: TransitiveDag
    family: AntichainFamily
    labels: tuple
    decode: Callable[[ChainSolution], frozenset]

    def label_index(self) -> dict:
        return {lab: v for v, lab in enumerate(self.labels)}


# ---------------------------------------------------------------------------
# builders


def lis_graph(sequence: Sequence[int]) -> Reduction:
    """Vertices are positions, edges (i, j) whenever i < j and a_i < a_j."""
    inst = sequence if isinstance(sequence, LisInstance) else LisInstance(tuple(sequence))
    a = inst.sequence
    n = len(a)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if a[i] < a[j]]
    dag = build_transitive_dag([1.0] * n, edges)
    family = AntichainFamily.build(dag, [[i] for i in range(n)], 1)
    return Reduction(inst, dag, family, tuple(range(n)), _index_set_decode)


def interval_graph(
    intervals: Sequence[tuple[float, float]], weights: Sequence[float] | None = None
) -> Reduction:
    """Vertices are intervals, edges (i, j) whenever r_i <= l_j."""
    if isinstance(intervals, IntervalsInstance):
        inst = intervals
    else:
        ivs = tuple((float(l), float(r)) for l, r in intervals)
        w = tuple(float(x) for x in weights) if weights is not None else (1.0,) * len(ivs)
        inst = IntervalsInstance(ivs, w)
    n = len(inst.intervals)
    edges = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and inst.intervals[i][1] <= inst.intervals[j][0]
    ]
    dag = build_transitive_dag(inst.weights, edges)
    family = AntichainFamily.build(dag, [[i] for i in range(n)], 1)
    return Reduction(inst, dag, family, tuple(range(n)), _index_set_decode)


def lcs_graph(strings: Sequence[str], product_cap: int = DEFAULT_PRODUCT_CAP) -> Reduction:
    """Vertices are matching index tuples, edges the componentwise-strict order.

    The potentially-missing set S_{i,j} holds the tuples whose i-th
    coordinate is j; a vertex lies in exactly k of them, so K = k.
    """
    inst = strings if isinstance(strings, LcsInstance) else LcsInstance(tuple(strings))
    k = len(inst.strings)
    prod = 1
    for s in inst.strings:
        prod *= max(1, len(s))
    if prod > product_cap:
        raise InstanceTooLarge(f"product of string lengths {prod} exceeds cap {product_cap}")

    labels = [
        tup
        for tup in _matching_tuples(inst.strings)
    ]
    labels.sort()
    index = {lab: v for v, lab in enumerate(labels)}
    edges = [
        (index[p], index[q])
        for p in labels
        for q in labels
        if all(pi < qi for pi, qi in zip(p, q))
    ]
    dag = build_transitive_dag([1.0] * len(labels), edges)
    sets = [
        [index[p] for p in labels if p[i] == j]
        for i in range(k)
        for j in range(len(inst.strings[i]))
    ]
    family = AntichainFamily.build(dag, sets, k)
    decode = _labelled_set_decode(tuple(labels))
    return Reduction(inst, dag, family, tuple(labels), decode)


def _matching_tuples(strings: tuple[str, ...]):
    k = len(strings)
    first = strings[0]
    for j, ch in enumerate(first):
        yield from _extend_tuple((j,), ch, strings, 1, k)


def _extend_tuple(prefix, ch, strings, i, k):
    if i == k:
        yield prefix
        return
    for j, c in enumerate(strings[i]):
        if c == ch:
            yield from _extend_tuple(prefix + (j,), ch, strings, i + 1, k)


def lps_graph(string: str) -> Reduction:
    """Vertices are matching pairs (p, q), p <= q; edges nest strictly inward.

    A pair with p < q weighs 2 (both endpoints enter the palindrome), a
    center p = q weighs 1.  S_i holds the pairs touching position i; K = 2.
    """
    inst = string if isinstance(string, LpsInstance) else LpsInstance(string)
    a = inst.string
    n = len(a)
    labels = [(p, q) for p in range(n) for q in range(p, n) if a[p] == a[q]]
    labels.sort()
    index = {lab: v for v, lab in enumerate(labels)}
    weights = [2.0 if p < q else 1.0 for p, q in labels]
    edges = [
        (index[(p1, q1)], index[(p2, q2)])
        for (p1, q1) in labels
        for (p2, q2) in labels
        if p1 < p2 <= q2 < q1
    ]
    dag = build_transitive_dag(weights, edges)
    sets = [[index[(p, q)] for (p, q) in labels if p == i or q == i] for i in range(n)]
    family = AntichainFamily.build(dag, sets, 2)

    def decode(chain: ChainSolution) -> frozenset[int]:
        out = set()
        for v in chain.vertices:
            p, q = labels[v]
            out.add(p)
            out.add(q)
        return frozenset(out)

    return Reduction(inst, dag, family, tuple(labels), decode)


def knapsack_graph(
    costs: Sequence[int],
    weights: Sequence[float] | None = None,
    capacity: int | None = None,
    product_cap: int = DEFAULT_PRODUCT_CAP,
) -> Reduction:
    """Vertices are (item, cost-budget) states (i, p) with c(i) <= p <= C.

    An edge ((i1, p1), (i2, p2)) needs i1 < i2 and p1 + c(i2) <= p2, so the
    budget coordinate certifies total cost along any chain stays within C.
    S_i holds all states of item i; K = 1.
    """
    if isinstance(costs, KnapsackInstance):
        inst = costs
    else:
        inst = KnapsackInstance(tuple(int(c) for c in costs), tuple(float(w) for w in weights), int(capacity))
    n = len(inst.costs)
    if n * inst.capacity > product_cap:
        raise InstanceTooLarge(f"n*C = {n * inst.capacity} exceeds cap {product_cap}")
    labels = [(i, p) for i in range(n) for p in range(inst.costs[i], inst.capacity + 1)]
    index = {lab: v for v, lab in enumerate(labels)}
    w = [inst.weights[i] for i, _ in labels]
    edges = [
        (index[(i1, p1)], index[(i2, p2)])
        for (i1, p1) in labels
        for (i2, p2) in labels
        if i1 < i2 and p1 + inst.costs[i2] <= p2
    ]
    dag = build_transitive_dag(w, edges)
    # items with cost above capacity contribute an empty (no-op) missing set,
    # keeping deletion slots aligned with item indices
    sets = [[index[(i, p)] for p in range(inst.costs[i], inst.capacity + 1)] for i in range(n)]
    family = AntichainFamily.build(dag, sets, 1)

    def decode(chain: ChainSolution) -> frozenset[int]:
        return frozenset(labels[v][0] for v in chain.vertices)

    return Reduction(inst, dag, family, tuple(labels), decode)


def _index_set_decode(chain: ChainSolution) -> frozenset[int]:
    return frozenset(chain.vertices)


def _labelled_set_decode(labels: tuple):
    def decode(chain: ChainSolution) -> frozenset:
        return frozenset(labels[v] for v in chain.vertices)

    return decode


_BUILDERS = {
    "lis": lis_graph,
    "intervals": interval_graph,
    "lcs": lcs_graph,
    "lps": lps_graph,
    "knapsack": knapsack_graph,
}


def build_reduction(instance: ProblemInstance, **kwargs) -> Reduction:
    return _BUILDERS[instance.problem](instance, **kwargs)


# ---------------------------------------------------------------------------
# classical DP oracles


def exact_oracle(instance: ProblemInstance) -> tuple[float, frozenset]:
    """Exact optimum and one optimal solution via the problem's textbook DP."""
    if isinstance(instance, LisInstance):
        return _lis_oracle(instance.sequence)
    if isinstance(instance, IntervalsInstance):
        return _intervals_oracle(instance.intervals, instance.weights)
    if isinstance(instance, LcsInstance):
        return _lcs_oracle(instance.strings)
    if isinstance(instance, LpsInstance):
        return _lps_oracle(instance.string)
    if isinstance(instance, KnapsackInstance):
        return _knapsack_oracle(instance.costs, instance.weights, instance.capacity)
    raise TypeError(f"not a problem instance: {instance!r}")


def _lis_oracle(a: tuple[int, ...]) -> tuple[float, frozenset[int]]:
    n = len(a)
    best = [1] * n
    prev = [-1] * n
    for j in range(n):
        for i in range(j):
            if a[i] < a[j] and best[i] + 1 > best[j]:
                best[j] = best[i] + 1
                prev[j] = i
    if n == 0:
        return 0.0, frozenset()
    end = max(range(n), key=lambda j: (best[j], -j))
    out = []
    while end >= 0:
        out.append(end)
        end = prev[end]
    return float(len(out)), frozenset(out)


def _intervals_oracle(intervals, weights) -> tuple[float, frozenset[int]]:
    n = len(intervals)
    order = sorted(range(n), key=lambda i: intervals[i][1])
    best = [0.0] * (n + 1)
    take: list[frozenset[int]] = [frozenset()] * (n + 1)
    for t in range(1, n + 1):
        i = order[t - 1]
        compat = 0
        for s in range(t - 1, 0, -1):
            if intervals[order[s - 1]][1] <= intervals[i][0]:
                compat = s
                break
        with_i = best[compat] + weights[i]
        if with_i > best[t - 1]:
            best[t] = with_i
            take[t] = take[compat] | {i}
        else:
            best[t] = best[t - 1]
            take[t] = take[t - 1]
    return best[n], take[n]


def _lcs_oracle(strings: tuple[str, ...]) -> tuple[float, frozenset]:
    """k-dimensional Wagner-Fischer table over index prefixes."""
    k = len(strings)
    dims = tuple(len(s) + 1 for s in strings)
    table = np.zeros(dims, dtype=np.int64)
    for pos in np.ndindex(*dims):
        if any(p == 0 for p in pos):
            continue
        chars = {strings[i][pos[i] - 1] for i in range(k)}
        cands = [table[tuple(p - (1 if i == j else 0) for j, p in enumerate(pos))] for i in range(k)]
        val = max(cands)
        if len(chars) == 1:
            val = max(val, table[tuple(p - 1 for p in pos)] + 1)
        table[pos] = val
    # backtrack one optimal tuple set
    sol = []
    pos = tuple(d - 1 for d in dims)
    while all(p > 0 for p in pos):
        chars = {strings[i][pos[i] - 1] for i in range(k)}
        if len(chars) == 1 and table[pos] == table[tuple(p - 1 for p in pos)] + 1:
            sol.append(tuple(p - 1 for p in pos))
            pos = tuple(p - 1 for p in pos)
            continue
        for i in range(k):
            nxt = tuple(p - (1 if i == j else 0) for j, p in enumerate(pos))
            if table[nxt] == table[pos]:
                pos = nxt
                break
        else:
            break
    return float(table[tuple(d - 1 for d in dims)]), frozenset(sol)


def _lps_oracle(a: str) -> tuple[float, frozenset[int]]:
    """Interval DP: dp[i][j] = best palindrome length within a[i..j]."""
    n = len(a)
    if n == 0:
        return 0.0, frozenset()
    dp = [[0] * n for _ in range(n)]
    for i in range(n):
        dp[i][i] = 1
    for span in range(2, n + 1):
        for i in range(n - span + 1):
            j = i + span - 1
            if a[i] == a[j]:
                inner = dp[i + 1][j - 1] if span > 2 else 0
                dp[i][j] = inner + 2
            dp[i][j] = max(dp[i][j], dp[i + 1][j], dp[i][j - 1])
    sol = set()
    i, j = 0, n - 1
    while i <= j:
        if i == j:
            sol.add(i)
            break
        if a[i] == a[j] and dp[i][j] == (dp[i + 1][j - 1] if j - i > 1 else 0) + 2:
            sol.add(i)
            sol.add(j)
            i += 1
            j -= 1
        elif dp[i][j] == dp[i + 1][j]:
            i += 1
        else:
            j -= 1
    return float(dp[0][n - 1]), frozenset(sol)


def _knapsack_oracle(costs, weights, capacity) -> tuple[float, frozenset[int]]:
    n = len(costs)
    dp = np.zeros(capacity + 1, dtype=np.float64)
    keep = np.zeros((n, capacity + 1), dtype=bool)
    for i in range(n):
        c = costs[i]
        prev = dp.copy()
        for p in range(capacity, c - 1, -1):
            cand = prev[p - c] + weights[i]
            if cand > dp[p]:
                dp[p] = cand
                keep[i, p] = True
    sol = set()
    p = int(np.argmax(dp))
    for i in range(n - 1, -1, -1):
        if keep[i, p]:
            sol.add(i)
            p -= costs[i]
    return float(dp.max()), frozenset(sol)


# ---------------------------------------------------------------------------
# deletion plumbing (one element of the source instance disappears)


def deletion_count(instance: ProblemInstance) -> int:
    if isinstance(instance, LcsInstance):
        return sum(len(s) for s in instance.strings)
    if isinstance(instance, LisInstance):
        return len(instance.sequence)
    if isinstance(instance, IntervalsInstance):
        return len(instance.intervals)
    if isinstance(instance, LpsInstance):
        return len(instance.string)
    if isinstance(instance, KnapsackInstance):
        return len(instance.costs)
    raise TypeError(f"not a problem instance: {instance!r}")


def _lcs_slot(instance: LcsInstance, slot: int) -> tuple[int, int]:
    for i, s in enumerate(instance.strings):
        if slot < len(s):
            return i, slot
        slot -= len(s)
    raise IndexError("deletion slot out of range")


def delete_element(instance: ProblemInstance, slot: int):
    """The instance with source element ``slot`` removed (indices shift down)."""
    if isinstance(instance, LisInstance):
        a = instance.sequence
        return LisInstance(a[:slot] + a[slot + 1 :])
    if isinstance(instance, IntervalsInstance):
        return IntervalsInstance(
            instance.intervals[:slot] + instance.intervals[slot + 1 :],
            instance.weights[:slot] + instance.weights[slot + 1 :],
        )
    if isinstance(instance, LcsInstance):
        i, j = _lcs_slot(instance, slot)
        s = instance.strings[i]
        return LcsInstance(
            instance.strings[:i] + (s[:j] + s[j + 1 :],) + instance.strings[i + 1 :]
        )
    if isinstance(instance, LpsInstance):
        return LpsInstance(instance.string[:slot] + instance.string[slot + 1 :])
    if isinstance(instance, KnapsackInstance):
        return KnapsackInstance(
            instance.costs[:slot] + instance.costs[slot + 1 :],
            instance.weights[:slot] + instance.weights[slot + 1 :],
            instance.capacity,
        )
    raise TypeError(f"not a problem instance: {instance!r}")


def lift_solution(instance: ProblemInstance, slot: int, solution: frozenset) -> frozenset:
    """Map a deleted-instance solution back into original index space.

    This is the canonical shift: positions at or above the deleted one move
    up by one, so symmetric differences against full-instance solutions are
    well defined.
    """
    if isinstance(instance, (LisInstance, IntervalsInstance, LpsInstance, KnapsackInstance)):
        return frozenset(x if x < slot else x + 1 for x in solution)
    if isinstance(instance, LcsInstance):
        i, j = _lcs_slot(instance, slot)
        return frozenset(
            tuple(
                p if (axis != i or p < j) else p + 1
                for axis, p in enumerate(tup)
            )
            for tup in solution
        )
    raise TypeError(f"not a problem instance: {instance!r}")


# ---------------------------------------------------------------------------
# instance JSON codecs


def instance_to_json(instance) -> dict:
    if isinstance(instance, LisInstance):
        return {"problem": "lis", "sequence": list(instance.sequence)}
    if isinstance(instance, IntervalsInstance):
        return {
            "problem": "intervals",
            "items": [
                {"l": l, "r": r, "w": w}
                for (l, r), w in zip(instance.intervals, instance.weights)
            ],
        }
    if isinstance(instance, LcsInstance):
        return {"problem": "lcs", "strings": list(instance.strings)}
    if isinstance(instance, LpsInstance):
        return {"problem": "lps", "string": instance.string}
    if isinstance(instance, KnapsackInstance):
        return {
            "problem": "knapsack",
            "costs": list(instance.costs),
            "weights": list(instance.weights),
            "capacity": instance.capacity,
        }
    raise TypeError(f"not a problem instance: {instance!r}")


def instance_from_json(obj: Mapping | str):
    if isinstance(obj, str):
        try:
            obj = json.loads(obj)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    try:
        problem = obj["problem"]
        if problem == "lis":
            return LisInstance(tuple(int(x) for x in obj["sequence"]))
        if problem == "intervals":
            items = obj["items"]
            return IntervalsInstance(
                tuple((float(it["l"]), float(it["r"])) for it in items),
                tuple(float(it.get("w", 1.0)) for it in items),
            )
        if problem == "lcs":
            return LcsInstance(tuple(str(s) for s in obj["strings"]))
        if problem == "lps":
            return LpsInstance(str(obj["string"]))
        if problem == "knapsack":
            return KnapsackInstance(
                tuple(int(c) for c in obj["costs"]),
                tuple(float(w) for w in obj["weights"]),
                int(obj["capacity"]),
            )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed instance: {exc}") from exc
    raise ParseError(f"unknown problem tag {obj.get('problem')!r}")
