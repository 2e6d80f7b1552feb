"""Backward-analysis harness: indicator sums over random insertion orders.

A property maps a prefix (an array of elements) to a subset of it.  For a
random permutation ``p_1..p_n`` the harness records ``X_i = [p_i in P(P_i)]``
and aggregates the tail of ``sum X_i`` over independent trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .random_model import substream
from .staircase import staircase_mask


class ContractViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class Property:
    fn: Callable[[np.ndarray], Sequence]
    declared_k: int | None = None
    name: str = "property"

    def __call__(self, prefix: np.ndarray):
        return self.fn(prefix)


@dataclass
class BackwardRun:
    n: int
    indicators: np.ndarray
    triggers: list  # element inserted at each step with X_i = 1
    max_output: int
    k_violations: int

    @property
    def sum(self) -> int:
        return int(np.count_nonzero(self.indicators))


@dataclass(frozen=True)
class TailConfig:
    k: int
    gamma: float = 2 * math.e
    trials: int = 100
    seed: int = 0
    c: float | None = None  # failure exponent of the size assumption, n^{-c}
    c_prime: float = 1.0  # inflation of k when the size bound only holds whp

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.gamma < 2 * math.e:
            raise ValueError("gamma must be >= 2e")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")
        if self.c_prime < 1.0:
            raise ValueError("c_prime must be >= 1")


@dataclass
class TailEstimate:
    fraction: float
    trials: int
    threshold: float
    bound: float
    slack: float
    declared_k_violated: bool
    sums: list[int]

    @property
    def within_bound(self) -> bool:
        return self.fraction <= self.bound + self.slack


def evaluate_order(shuffled: np.ndarray, prop: Property, *, check_order: bool = False,
                   rng: np.random.Generator | None = None) -> BackwardRun:
    """Indicator run for a fixed insertion order."""
    n = len(shuffled)
    indicators = np.zeros(n, dtype=bool)
    inserted: set = set()
    triggers = []
    max_out = 0
    k_viol = 0
    for i in range(n):
        p = shuffled[i].item() if hasattr(shuffled[i], "item") else shuffled[i]
        inserted.add(p)
        prefix = shuffled[: i + 1]
        out = prop(prefix)
        out_set = {o.item() if hasattr(o, "item") else o for o in out}
        if not out_set <= inserted:
            raise ContractViolation(f"{prop.name}: output is not a subset of the prefix at step {i + 1}")
        if check_order and rng is not None and i > 0:
            again = prop(prefix[rng.permutation(i + 1)])
            if {o.item() if hasattr(o, "item") else o for o in again} != out_set:
                raise ContractViolation(f"{prop.name}: output depends on prefix order at step {i + 1}")
        max_out = max(max_out, len(out_set))
        if prop.declared_k is not None and len(out_set) > prop.declared_k:
            k_viol += 1
        if p in out_set:
            indicators[i] = True
            triggers.append(p)
    return BackwardRun(n, indicators, triggers, max_out, k_viol)


def backward_run(elements, prop: Property, seed: int = 0, *, rng: np.random.Generator | None = None,
                 check_order: bool = False) -> BackwardRun:
    elements = np.asarray(elements)
    if len(elements) < 1:
        raise ValueError("need at least one element")
    if rng is None:
        rng = substream(seed)
    shuffled = elements[rng.permutation(len(elements))]
    return evaluate_order(shuffled, prop, check_order=check_order, rng=rng)


def tail_threshold(n: int, k: int, gamma: float, c_prime: float = 1.0) -> float:
    return gamma * 2.0 * c_prime * k * math.log(n)


def tail_probability(elements, prop: Property, cfg: TailConfig) -> TailEstimate:
    """Fraction of trials whose indicator sum exceeds ``gamma * 2 c' k ln n``.

    ``bound`` is ``n^{-gamma k}`` (plus ``n^{-c}`` when ``cfg.c`` is set) and
    ``slack`` three binomial standard errors of the estimate.
    """
    elements = np.asarray(elements)
    n = len(elements)
    threshold = tail_threshold(n, cfg.k, cfg.gamma, cfg.c_prime)
    sums = []
    violated = False
    for t in range(cfg.trials):
        run = backward_run(elements, prop, rng=substream(cfg.seed, t))
        sums.append(run.sum)
        violated |= run.max_output > cfg.k * cfg.c_prime and cfg.c is None
        violated |= run.k_violations > 0
    exceed = sum(s > threshold for s in sums)
    frac = exceed / cfg.trials if cfg.trials else 0.0
    bound = float(n) ** (-cfg.gamma * cfg.k)
    if cfg.c is not None:
        bound += float(n) ** (-cfg.c)
    slack = 3.0 * math.sqrt(frac * (1.0 - frac) / cfg.trials) if cfg.trials else 0.0
    return TailEstimate(frac, cfg.trials, threshold, bound, slack, violated, sums)


# stock properties --------------------------------------------------------

def prefix_minimum() -> Property:
    return Property(lambda prefix: (prefix.min(),), declared_k=1, name="prefix-minimum")


def whole_prefix() -> Property:
    return Property(lambda prefix: list(prefix), name="whole-prefix")


def empty_property() -> Property:
    return Property(lambda prefix: (), declared_k=0, name="empty")


def interval_endpoints(x) -> Property:
    """The (at most two) elements closest to ``x`` from either side; empty once ``x`` is in the prefix."""

    def fn(prefix):
        if np.any(prefix == x):
            return ()
        lo = prefix[prefix < x]
        hi = prefix[prefix > x]
        out = []
        if len(lo):
            out.append(lo.max())
        if len(hi):
            out.append(hi.min())
        return out

    return Property(fn, declared_k=2, name=f"interval-endpoints({x})")


def staircase_property(points: np.ndarray, declared_k: int | None = None) -> Property:
    """Elements are row indices into ``points``; the property is the staircase of the prefix rows."""
    points = np.asarray(points, dtype=float)

    def fn(prefix):
        rows = np.asarray(prefix, dtype=np.int64)
        return rows[staircase_mask(points[rows], rows)]

    return Property(fn, declared_k=declared_k, name="staircase")


# quicksort -----------------------------------------------------------------

@dataclass
class QuicksortResult:
    counts: np.ndarray  # comparisons each key took part in as a non-pivot
    total: int

    @property
    def max_count(self) -> int:
        return int(self.counts.max()) if len(self.counts) else 0


def quicksort_counts_for_order(priority: np.ndarray) -> QuicksortResult:
    """Quicksort on keys ``0..n-1`` where each subproblem pivots on its earliest key in the order.

    ``priority[key]`` is the position of ``key`` in the pivot permutation.
    """
    n = len(priority)
    diff = np.zeros(n + 1, dtype=np.int64)
    pivot_hits = np.zeros(n, dtype=np.int64)
    total = 0
    stack = [(0, n - 1)] if n else []
    while stack:
        lo, hi = stack.pop()
        if lo >= hi:
            continue
        p = lo + int(np.argmin(priority[lo:hi + 1]))
        diff[lo] += 1
        diff[hi + 1] -= 1
        pivot_hits[p] += 1
        total += hi - lo
        stack.append((lo, p - 1))
        stack.append((p + 1, hi))
    counts = np.cumsum(diff[:n]) - pivot_hits
    return QuicksortResult(counts, total)


def quicksort_comparisons(n: int, seed: int = 0, *, rng: np.random.Generator | None = None) -> QuicksortResult:
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = substream(seed)
    order = rng.permutation(n)
    priority = np.empty(n, dtype=np.int64)
    priority[order] = np.arange(n)
    return quicksort_counts_for_order(priority)


def quicksort_expected_total(n: int) -> float:
    """Mean comparison count of random-pivot quicksort, ``2(n+1)H_n - 4n``."""
    h = math.fsum(1.0 / i for i in range(1, n + 1))
    return 2.0 * (n + 1) * h - 4.0 * n
