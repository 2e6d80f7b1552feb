"""End-to-end acceptance checks, one test per criterion, each at its stated size and tolerance."""

import math
import time

import pytest

from pplab.experiments import REGISTRY, ExperimentConfig, expected_proxy_size, run_experiment
from pplab.random_model import harmonic, v_delta, v_delta_mc

SEED = 20240601


def run(name, **params):
    t0 = time.perf_counter()
    res = run_experiment(ExperimentConfig(name, seed=SEED, params=params, threads=4))
    return res, time.perf_counter() - t0


def test_c01_vdelta_oracle(acceptance_report):
    t0 = time.perf_counter()
    parts, ok = [], True
    for i, (d, delta) in enumerate([(2, 0.01), (2, 0.1), (3, 0.01), (3, 0.1)]):
        r = v_delta_mc(d, delta, 1_000_000, seed=SEED + i)
        good = abs(v_delta(d, delta) - r.estimate) <= 4 * r.stderr
        ok &= good
        parts.append(f"d={d} Δ={delta}: z={(r.estimate - r.value) / r.stderr:+.2f}")
    secs = time.perf_counter() - t0
    ok &= secs < 60
    acceptance_report(1, "V_d closed form vs Monte Carlo", ok, "; ".join(parts), secs)
    assert ok


def test_c02_staircase_2d_mean(acceptance_report):
    res, secs = run("staircase-2d-mean", n=4096, trials=400)
    sizes = [r["size"] for r in res.rows]
    mean = sum(sizes) / len(sizes)
    se = math.sqrt(sum((s - mean) ** 2 for s in sizes) / (len(sizes) - 1) / len(sizes))
    ok = abs(mean - harmonic(4096)) <= 4 * se and secs < 30
    acceptance_report(2, "2D staircase mean = H_n", ok, res.summary, secs)
    assert ok and res.passed


def test_c03_staircase_whp_ceiling(acceptance_report):
    results = [run("staircase-whp", n=4096, d=d, trials=400) for d in (2, 3)]
    ok = all(r.passed for r, _ in results)
    summary = "; ".join(f"d={d}: {r.summary} (ceiling {8 * math.log(4096) ** (d - 1):.1f})"
                        for d, (r, _) in zip((2, 3), results))
    acceptance_report(3, "staircase size ceiling", ok, summary, sum(s for _, s in results))
    assert ok


def test_c04_quicksort_backward_bound(acceptance_report):
    res, secs = run("backward-quicksort", n=10_000, trials=50, gamma=2 * math.e)
    assert len(res.rows) == 50
    assert all(r["max_count"] <= 2 * math.e * 4 * math.log(10_000) for r in res.rows)
    acceptance_report(4, "quicksort per-element bound and mean", res.passed, res.summary, secs)
    assert res.passed


def test_c05_edges_per_line(acceptance_report):
    res, secs = run("edges-per-line", n=12, kmax=5, trials=200)
    assert len(res.rows) == 200 * 6
    acceptance_report(5, "at most k+2 edges per line", res.passed, res.summary, secs)
    assert res.passed


def test_c06_incremental_level_vertices(acceptance_report):
    res, secs = run("online-klevel", n=40, k=3, trials=50)
    assert all(r["bound"] == 400 for r in res.rows)
    acceptance_report(6, "incremental k-level vertices <= 2(k+2)n", res.passed, res.summary, secs)
    assert res.passed


def test_c07_candidate_diagram_oracle(acceptance_report):
    res, secs = run("candidate-vs-oracle", ns=[6, 10], trials=20, queries=500)
    assert len(res.rows) == 40
    acceptance_report(7, "candidate diagram vs direct evaluation", res.passed, res.summary, secs)
    assert res.passed


@pytest.fixture(scope="module")
def proxy_run():
    k = math.ceil(2 * math.log(2048) ** 2)
    res, secs = run("containment", n=2048, d=2, k=k, trials=20, queries=200)
    return res, secs


def test_c08_containment(acceptance_report, proxy_run):
    res, secs = proxy_run
    assert len(res.rows) == 20 * 200
    acceptance_report(8, "C(x) inside the proxy set", res.passed, res.summary, secs)
    assert res.passed


def test_c09_proxy_size(acceptance_report, proxy_run):
    res, secs = proxy_run
    exp = REGISTRY["proxy-size"]
    passed, summary = exp.check(res.manifest["config"], res.rows)
    n, k = 2048, res.rows[0]["k"]
    mean = sum(r["proxy_size"] for r in res.rows) / len(res.rows)
    oracle = expected_proxy_size(n, k)
    ok = passed and abs(mean - oracle) <= 0.25 * oracle
    acceptance_report(9, "proxy set size", ok, f"{summary}; sum min(k/i,1) = {oracle:.2f}", 0.0)
    assert ok


def test_c10_moment_trend(acceptance_report):
    res, secs = run("moments", ns=[20, 40], r_ratio=0.5, k=2, trials=50)
    acceptance_report(10, "sum b(v) trend from n=20 to n=40", res.passed, res.summary, secs)
    assert res.passed


def test_c11_overlay_trend(acceptance_report):
    res, secs = run("overlay-trend", ns=[16, 32], k=2, trials=10)
    acceptance_report(11, "overlay complexity trend", res.passed, res.summary, secs)
    assert res.passed


def test_c12_star_shaped(acceptance_report):
    res, secs = run("star-shaped", n=16, ks=[2, 4], rays=360, ray_samples=100, trials=1)
    assert len(res.rows) == 32
    acceptance_report(12, "k-environments star-shaped about their site", res.passed, res.summary, secs)
    assert res.passed
