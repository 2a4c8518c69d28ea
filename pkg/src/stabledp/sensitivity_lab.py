"""Measuring average sensitivity, pivot stability, and approximation quality.

Average sensitivity of a randomized solver is the mean, over single-element
deletions, of the earth mover's distance between its output distribution on
the full instance and on the deleted one, with symmetric difference of
decoded solutions as the ground metric.  The lab estimates each earth
mover's distance by drawing ``m`` solutions per side and solving the m-by-m
optimal assignment (an explicit transport plan, so the estimate is always
an upper-coupling cost and consistent as m grows), and it can also compute
the distance exactly on small explicit distributions via linear programming.

Deletions rebuild the reduction from the deleted source instance; decoded
solutions are lifted back to original coordinates by the canonical index
shift, so symmetric differences are taken in one common space.  Per-sample
random streams are shared between the two sides of a deletion, coupling the
parameter draws the way the paper's transport argument pairs them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog

from ._rng import SplitStream, as_stream
from .dag_core import opt_chain
from .errors import SupportTooLarge
from .reductions import (
    ProblemInstance,
    build_reduction,
    delete_element,
    deletion_count,
    exact_oracle,
    lift_solution,
)
from .rna import (
    RnaInstance,
    _cached_graph,
    delete_letter,
    lift_pairs,
    max_list_length,
    nussinov_solution,
    sample_length_bound,
)
from .stable_mwc import StableSolverConfig, mwc

__all__ = [
    "EmpiricalDistribution",
    "RatioStats",
    "SensitivityReport",
    "sym_diff_distance",
    "exact_em",
    "empirical_em",
    "draw_samples",
    "stable_sampler",
    "naive_sampler",
    "average_sensitivity",
    "approximation_experiment",
    "naive_vs_stable_comparison",
    "theorem_bound",
    "report_to_json",
    "report_to_csv",
    "DEFAULT_SUPPORT_CAP",
]

DEFAULT_SUPPORT_CAP = 2000


def sym_diff_distance(x: frozenset, y: frozenset) -> int:
    """|x symmetric-difference y| over any comparable element universe."""
    return len(frozenset(x) ^ frozenset(y))


# ---------------------------------------------------------------------------
# earth mover's distance


def exact_em(
    dist_a: Mapping[frozenset, float],
    dist_b: Mapping[frozenset, float],
    cap: int = DEFAULT_SUPPORT_CAP,
) -> float:
    """Exact optimal-transport cost between two explicit distributions.

    Ground metric is the symmetric difference of solutions; the transport
    problem is solved as a linear program (HiGHS), exact up to solver
    tolerance around 1e-10.
    """
    if len(dist_a) > cap or len(dist_b) > cap:
        raise SupportTooLarge(f"supports exceed cap {cap}")
    xs = sorted(dist_a, key=sorted)
    ys = sorted(dist_b, key=sorted)
    a = np.array([dist_a[x] for x in xs], dtype=np.float64)
    b = np.array([dist_b[y] for y in ys], dtype=np.float64)
    if a.sum() <= 0 or b.sum() <= 0:
        raise ValueError("distributions must have positive mass")
    a /= a.sum()
    b /= b.sum()
    na, nb = len(xs), len(ys)
    cost = np.array([[sym_diff_distance(x, y) for y in ys] for x in xs], dtype=np.float64)

    rows, cols, vals = [], [], []
    for i in range(na):
        for j in range(nb):
            k = i * nb + j
            rows.append(i)
            cols.append(k)
            vals.append(1.0)
            rows.append(na + j)
            cols.append(k)
            vals.append(1.0)
    a_eq = sparse.coo_matrix((vals, (rows, cols)), shape=(na + nb, na * nb))
    res = linprog(
        c=cost.ravel(),
        A_eq=a_eq,
        b_eq=np.concatenate([a, b]),
        bounds=(0, None),
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-10,
            "dual_feasibility_tolerance": 1e-10,
        },
    )
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A finite sample standing in for a solver's output distribution."""

    samples: tuple[frozenset, ...]
    seed: int

    @property
    def sample_count(self) -> int:
        return len(self.samples)

    def as_explicit(self) -> dict[frozenset, float]:
        out: dict[frozenset, float] = {}
        w = 1.0 / len(self.samples)
        for s in self.samples:
            out[s] = out.get(s, 0.0) + w
        return out


Sampler = Callable[[SplitStream], frozenset]


def draw_samples(sampler: Sampler, m: int, rng: SplitStream | int | None) -> EmpiricalDistribution:
    stream = as_stream(rng)
    return EmpiricalDistribution(
        samples=tuple(sampler(stream.child(j)) for j in range(m)),
        seed=stream.key,
    )


def empirical_em(
    sampler_a: Sampler, sampler_b: Sampler, m: int, rng: SplitStream | int | None
) -> float:
    """Assignment estimate of the earth mover's distance from m samples a side.

    Sample j of either side draws from the same derived stream key, so the
    two runs are coupled through common parameter draws; the m-by-m optimal
    assignment then realizes an explicit transport plan whose mean cost is
    reported.
    """
    if m < 1:
        raise ValueError("need at least one sample per side")
    stream = as_stream(rng)
    xs = [sampler_a(stream.child(j)) for j in range(m)]
    ys = [sampler_b(stream.child(j)) for j in range(m)]
    cost = _sym_diff_matrix(xs, ys)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum()) / m


def _sym_diff_matrix(xs: Sequence[frozenset], ys: Sequence[frozenset]) -> np.ndarray:
    """Pairwise symmetric-difference sizes via per-element bit encodings."""
    universe: dict = {}
    for s in xs:
        for e in s:
            universe.setdefault(e, len(universe))
    for s in ys:
        for e in s:
            universe.setdefault(e, len(universe))

    def encode(s: frozenset) -> int:
        mask = 0
        for e in s:
            mask |= 1 << universe[e]
        return mask

    ex = [encode(s) for s in xs]
    ey = [encode(s) for s in ys]
    cost = np.empty((len(ex), len(ey)), dtype=np.float64)
    for i, x in enumerate(ex):
        cost[i] = [(x ^ y).bit_count() for y in ey]
    return cost


# ---------------------------------------------------------------------------
# solver-as-sampler adapters


def _is_rna(instance) -> bool:
    return isinstance(instance, RnaInstance)


def _deletions(instance) -> int:
    return instance.n if _is_rna(instance) else deletion_count(instance)


def _delete(instance, slot: int):
    return delete_letter(instance, slot + 1) if _is_rna(instance) else delete_element(instance, slot)


def _lift(instance, slot: int, solution: frozenset) -> frozenset:
    if _is_rna(instance):
        return lift_pairs(slot + 1, solution)
    return lift_solution(instance, slot, solution)


def stable_sampler(instance, delta: float, eps: float | None = None) -> Sampler:
    """A sampler running the stable solver on the instance's reduction.

    For folding instances the list-length bound B is drawn inside each call,
    exactly as the end-to-end algorithm prescribes.  ``eps`` forces a fixed
    mechanism strength instead of sampling 1/eps.
    """
    if _is_rna(instance):
        if instance.n < 2:
            return lambda stream: frozenset()

        def sample_rna(stream: SplitStream) -> frozenset:
            b = sample_length_bound(instance.n, stream)
            reduction = _cached_graph(instance, max_list_length(b), max(instance.n, 14))
            return reduction.decode(_run_solver(reduction.dag, delta, eps, stream.child(1)))

        return sample_rna

    reduction = build_reduction(instance)

    def sample(stream: SplitStream) -> frozenset:
        return reduction.decode(_run_solver(reduction.dag, delta, eps, stream))

    return sample


def _run_solver(dag, delta: float, eps: float | None, stream: SplitStream):
    if eps is None:
        return mwc(dag, StableSolverConfig(delta=delta, seed=0), rng=stream)
    from .stable_mwc import rec

    return rec(dag, dag.full_universe(), eps, stream.child(1))


def naive_sampler(instance) -> Sampler:
    """The deterministic textbook DP as a (point-mass) sampler."""
    if _is_rna(instance):
        solution = nussinov_solution(instance)[1]
    else:
        solution = exact_oracle(instance)[1]
    return lambda stream: solution


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class RatioStats:
    mean: float
    std_error: float
    minimum: float
    trials: int

    def to_json(self) -> dict:
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "min": self.minimum,
            "trials": self.trials,
        }


@dataclass(frozen=True)
class SensitivityReport:
    problem: str
    n: int
    delta: float
    eps: float | None
    m: int
    per_deletion: tuple[float, ...]
    average: float
    paper_bound: float
    seed: int
    ratio_stats: RatioStats | None = None
    runtime_ms: int | None = None

    def with_runtime(self, runtime_ms: int | None) -> "SensitivityReport":
        return SensitivityReport(
            self.problem, self.n, self.delta, self.eps, self.m,
            self.per_deletion, self.average, self.paper_bound, self.seed,
            self.ratio_stats, runtime_ms,
        )


def theorem_bound(delta: float, k: int, num_vertices: int) -> float:
    """54 K B ln^2(2|V|B) with B = 17 ln(|V|)/delta (informational constant).

    This is the explicit constant the stability analysis accumulates; it is
    reported next to measurements, never asserted.
    """
    if num_vertices < 1:
        return 0.0
    b = 17.0 * math.log(max(num_vertices, 1)) / delta
    if b <= 0.0:
        return 0.0
    return 54.0 * k * b * math.log(2.0 * num_vertices * b) ** 2


def _measure_one_deletion(args) -> tuple[int, float]:
    (instance, slot, delta, eps, m, key) = args
    deleted = _delete(instance, slot)
    base = stable_sampler(instance, delta, eps)
    del_sampler = stable_sampler(deleted, delta, eps)

    def lifted(stream: SplitStream) -> frozenset:
        return _lift(instance, slot, del_sampler(stream))

    em = empirical_em(base, lifted, m, SplitStream(key))
    return slot, em


def average_sensitivity(
    instance,
    delta: float,
    m: int,
    rng: SplitStream | int | None = None,
    eps: float | None = None,
    jobs: int = 1,
    sampler_factory: Callable | None = None,
) -> SensitivityReport:
    """Measured average sensitivity of the stable solver on one instance.

    For each deletion slot the reduction is rebuilt from the deleted source
    instance and ``m`` runs per side feed the assignment estimator; the mean
    over slots is reported next to the analytic bound.  Deletion tasks are
    independent and may run in parallel (``jobs``); results are merged by
    slot index, so the report does not depend on the degree of parallelism.
    """
    stream = as_stream(rng)
    n_slots = _deletions(instance)
    reduction_vertices = _full_vertex_count(instance)
    k = _multiplicity(instance)

    if sampler_factory is None:
        tasks = [
            (instance, slot, delta, eps, m, stream.child(slot + 1).key)
            for slot in range(n_slots)
        ]
        if jobs > 1 and n_slots > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_measure_one_deletion, tasks))
        else:
            results = [_measure_one_deletion(t) for t in tasks]
    else:
        results = []
        for slot in range(n_slots):
            deleted = _delete(instance, slot)
            base = sampler_factory(instance)
            del_sampler = sampler_factory(deleted)

            def lifted(stream_, _s=slot, _d=del_sampler):
                return _lift(instance, _s, _d(stream_))

            results.append(
                (slot, empirical_em(base, lifted, m, stream.child(slot + 1)))
            )

    results.sort()
    per_deletion = tuple(em for _, em in results)
    average = float(sum(per_deletion) / n_slots) if n_slots else 0.0
    return SensitivityReport(
        problem=getattr(instance, "problem", "unknown"),
        n=n_slots,
        delta=delta,
        eps=eps,
        m=m,
        per_deletion=per_deletion,
        average=average,
        paper_bound=theorem_bound(delta, k, reduction_vertices),
        seed=stream.key,
    )


def _full_vertex_count(instance) -> int:
    if _is_rna(instance):
        if instance.n < 2:
            return 0
        return _cached_graph(instance, max_list_length(2 * math.log2(max(instance.n, 2))), max(instance.n, 14)).dag.m
    return build_reduction(instance).dag.m


def _multiplicity(instance) -> int:
    if _is_rna(instance):
        if instance.n < 2:
            return 1
        return _cached_graph(
            instance, max_list_length(2 * math.log2(max(instance.n, 2))), max(instance.n, 14)
        ).family.multiplicity_bound
    return build_reduction(instance).family.multiplicity_bound


def approximation_experiment(
    instance,
    delta: float,
    trials: int,
    rng: SplitStream | int | None = None,
    eps: float | None = None,
) -> RatioStats:
    """Achieved/optimal ratio statistics of the stable solver over seeds."""
    stream = as_stream(rng)
    if _is_rna(instance):
        opt = float(nussinov_solution(instance)[0])
        objective = len
    else:
        opt = float(exact_oracle(instance)[0])
        objective = _solution_objective(instance)
    sampler = stable_sampler(instance, delta, eps)
    ratios = np.empty(trials, dtype=np.float64)
    for t in range(trials):
        sol = sampler(stream.child(t))
        ratios[t] = 1.0 if opt == 0.0 else objective(sol) / opt
    return RatioStats(
        mean=float(ratios.mean()),
        std_error=float(ratios.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
        minimum=float(ratios.min()),
        trials=trials,
    )


def _solution_objective(instance) -> Callable[[frozenset], float]:
    from .reductions import IntervalsInstance, KnapsackInstance

    if isinstance(instance, IntervalsInstance):
        return lambda sol: float(sum(instance.weights[i] for i in sol))
    if isinstance(instance, KnapsackInstance):
        return lambda sol: float(sum(instance.weights[i] for i in sol))
    return lambda sol: float(len(sol))


def naive_vs_stable_comparison(
    instance,
    delta: float,
    m: int,
    rng: SplitStream | int | None = None,
) -> tuple[SensitivityReport, SensitivityReport]:
    """Sensitivity of the deterministic textbook DP next to the stable solver.

    Both reports use the same deletions and the same master seed.
    """
    stream = as_stream(rng)
    naive = average_sensitivity(
        instance, delta, m, SplitStream(stream.key), sampler_factory=naive_sampler
    )
    stable = average_sensitivity(instance, delta, m, SplitStream(stream.key))
    return naive, stable


# ---------------------------------------------------------------------------
# serialization


def report_to_json(report: SensitivityReport) -> dict:
    return {
        "problem": report.problem,
        "n": report.n,
        "delta": report.delta,
        "eps": report.eps,
        "m": report.m,
        "per_deletion": list(report.per_deletion),
        "average": report.average,
        "paper_bound": report.paper_bound,
        "ratio_stats": report.ratio_stats.to_json() if report.ratio_stats else None,
        "seed": report.seed,
        "runtime_ms": report.runtime_ms,
    }


def report_to_csv(report: SensitivityReport) -> str:
    """Flat CSV: one row per deletion carrying the scalar fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["problem", "n", "delta", "eps", "m", "seed", "average", "paper_bound",
         "deletion_index", "em"]
    )
    for i, em in enumerate(report.per_deletion):
        writer.writerow(
            [report.problem, report.n, report.delta,
             "" if report.eps is None else report.eps,
             report.m, report.seed, report.average, report.paper_bound, i, em]
        )
    return buf.getvalue()
