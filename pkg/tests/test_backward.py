import math

import numpy as np
import pytest

from pplab.backward import (
    ContractViolation, Property, TailConfig, backward_run, empty_property, evaluate_order, interval_endpoints,
    prefix_minimum, quicksort_comparisons, quicksort_counts_for_order, quicksort_expected_total, staircase_property,
    tail_probability, tail_threshold, whole_prefix,
)
from pplab.random_model import harmonic, substream


def test_whole_prefix_sum_is_n():
    run = backward_run(np.arange(50), whole_prefix(), seed=1)
    assert run.sum == 50 and run.indicators.all()


def test_empty_property_sum_is_zero():
    assert backward_run(np.arange(50), empty_property(), seed=1).sum == 0


def test_first_indicator_when_singleton_is_selected():
    for seed in range(10):
        run = backward_run(np.arange(30), prefix_minimum(), seed=seed)
        assert run.indicators[0]
        assert 0 <= run.sum <= 30


def test_contract_violation():
    bad = Property(lambda prefix: [10_000], name="outsider")
    with pytest.raises(ContractViolation):
        backward_run(np.arange(5), bad)


def test_order_dependence_detected_in_debug_mode():
    first = Property(lambda prefix: [prefix[0]], name="first-element")
    with pytest.raises(ContractViolation):
        backward_run(np.arange(20), first, seed=3, check_order=True)
    backward_run(np.arange(20), prefix_minimum(), seed=3, check_order=True)


def test_prefix_minimum_mean_and_variance():
    n, trials = 1000, 400
    sums = np.array([backward_run(np.arange(n), prefix_minimum(), rng=substream(77, t)).sum for t in range(trials)])
    mean = sums.mean()
    se = sums.std(ddof=1) / math.sqrt(trials)
    assert harmonic(n) == pytest.approx(7.485, abs=1e-3)
    assert abs(mean - harmonic(n)) <= 4 * se
    var = sum((1 / i) * (1 - 1 / i) for i in range(1, n + 1))
    assert sums.var(ddof=1) == pytest.approx(var, rel=0.25)


def test_tail_threshold_and_gamma_guard():
    assert tail_threshold(100, 2, 2 * math.e) == pytest.approx(2 * math.e * 4 * math.log(100))
    with pytest.raises(ValueError):
        TailConfig(k=1, gamma=5.0)


@pytest.mark.slow
def test_prefix_minimum_tail_is_empty():
    est = tail_probability(np.arange(10_000), prefix_minimum(), TailConfig(k=1, trials=200, seed=5))
    assert est.fraction == 0.0
    assert est.within_bound and not est.declared_k_violated


def test_declared_k_violation_flagged():
    pts = substream(1).random((200, 2))
    est = tail_probability(np.arange(200), staircase_property(pts), TailConfig(k=1, trials=5, seed=2))
    assert est.declared_k_violated
    est = tail_probability(np.arange(200), staircase_property(pts, declared_k=2), TailConfig(k=50, trials=5, seed=2))
    assert est.declared_k_violated


def test_staircase_tail_within_budget():
    n = 512
    pts = substream(9).random((n, 2))
    k = math.ceil(2 * math.log(n))
    est = tail_probability(np.arange(n), staircase_property(pts), TailConfig(k=k, trials=60, seed=4, c=1.0))
    assert est.within_bound
    assert est.fraction <= n ** (-2 * math.e * k) + n ** -1.0 + est.slack


def test_quicksort_small_cases():
    assert quicksort_comparisons(1).total == 0
    r = quicksort_comparisons(2, seed=4)
    assert r.total == 1
    assert sorted(r.counts.tolist()) == [0, 1]


def test_quicksort_counts_sum_to_total(rng):
    for n in (5, 37, 300):
        r = quicksort_comparisons(n, rng=rng)
        assert r.counts.sum() == r.total


def test_quicksort_counts_equal_interval_endpoint_sums(rng):
    # comparisons of key x = times x's nearest inserted neighbour on either side changes
    n = 60
    order = rng.permutation(n)
    priority = np.empty(n, dtype=np.int64)
    priority[order] = np.arange(n)
    qs = quicksort_counts_for_order(priority)
    for x in range(n):
        assert evaluate_order(order, interval_endpoints(x)).sum == qs.counts[x]


def test_quicksort_exhaustive_mean_n4():
    import itertools

    totals = []
    for perm in itertools.permutations(range(4)):
        priority = np.empty(4, dtype=np.int64)
        priority[list(perm)] = np.arange(4)
        totals.append(quicksort_counts_for_order(priority).total)
    assert np.mean(totals) == pytest.approx(quicksort_expected_total(4))
