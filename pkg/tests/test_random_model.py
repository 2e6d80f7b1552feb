import math

import numpy as np
import pytest
from scipy import stats

from pplab.random_model import (
    ConfigError, DistributionSpec, harmonic, sample_site_set, substream, v_delta, v_delta_mc,
)


def test_sampling_is_deterministic():
    a = sample_site_set(3, 2, seed=42)
    b = sample_site_set(3, 2, seed=42)
    assert a.locs.tobytes() == b.locs.tobytes()
    assert a.attrs.tobytes() == b.attrs.tobytes()
    assert sample_site_set(3, 2, seed=43).attrs.tobytes() != a.attrs.tobytes()


def test_substreams_are_independent_of_call_order():
    x = substream(7, 3).random(4)
    substream(7, 1).random(100)
    assert np.array_equal(substream(7, 3).random(4), x)
    assert not np.array_equal(substream(7, 2).random(4), x)


def test_uniform_attributes_pass_ks():
    s = sample_site_set(10_000, 2, seed=5)
    for j in range(2):
        D = stats.kstest(s.attrs[:, j], "uniform").statistic
        assert D <= 1.63 / math.sqrt(10_000)


def test_pwl_inverse_cdf_mean():
    # inverse CDF t = u^2 sampled at breakpoints; the mean of the piecewise-linear interpolant is close to 1/3
    us = np.linspace(0.0, 1.0, 41)
    spec = DistributionSpec("pwl", tuple((float(u), float(u * u)) for u in us))
    s = sample_site_set(20_000, 1, attr_spec=spec, seed=9)
    x = s.attrs[:, 0]
    se = x.std(ddof=1) / math.sqrt(len(x))
    exact = float(np.sum((us[1:] - us[:-1]) * (us[1:] ** 2 + us[:-1] ** 2) / 2))
    assert abs(exact - 1 / 3) < 1e-3
    assert abs(x.mean() - exact) <= 3 * se


def test_distribution_spec_validation():
    with pytest.raises(ConfigError):
        DistributionSpec("gauss")
    with pytest.raises(ConfigError):
        DistributionSpec("pwl", ((0.1, 0.0), (1.0, 1.0)))
    with pytest.raises(ConfigError):
        DistributionSpec("pwl", ((0.0, 0.5), (1.0, 0.2)))
    with pytest.raises(ConfigError):
        DistributionSpec.from_json({"kind": "pwl", "points": "nope"})
    spec = DistributionSpec.from_json({"kind": "pwl", "points": [[0, 0], [0.5, 0.2], [1, 1]]})
    assert DistributionSpec.from_json(spec.to_json()) == spec


def test_per_coordinate_specs_and_file_locations():
    specs = [DistributionSpec(), DistributionSpec("pwl", ((0.0, 0.0), (1.0, 0.5)))]
    locs = [(0, 0), (1, 0), (0, 1)]
    s = sample_site_set(3, 2, "file", specs, seed=1, locations=locs)
    assert np.array_equal(s.locs, np.asarray(locs, dtype=float))
    assert np.all(s.attrs[:, 1] <= 0.5)
    with pytest.raises(ConfigError):
        sample_site_set(3, 3, attr_spec=specs)
    with pytest.raises(ConfigError):
        sample_site_set(3, 2, "file")
    with pytest.raises(ConfigError):
        sample_site_set(3, 2, "gaussian")


def test_v_delta_examples():
    for delta in (0.01, 0.3, 1.0):
        assert v_delta(1, delta) == pytest.approx(delta)
    assert v_delta(2, 1.0) == 1.0
    assert v_delta(2, 0.1) == pytest.approx(0.1 + 0.1 * math.log(10))
    assert v_delta(2, 0.1) == pytest.approx(0.33026, abs=5e-6)


def test_v_delta_domain():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            v_delta(2, bad)


def test_v_delta_near_one_is_accurate():
    # V_2(1 - e) = 1 - e^2/2 + O(e^3)
    e = 1e-9
    assert v_delta(2, 1 - e) == pytest.approx(1 - e * e / 2, abs=1e-15)


def test_v_delta_monotone():
    deltas = np.linspace(0.001, 1.0, 200)
    for d in range(1, 6):
        vals = [v_delta(d, x) for x in deltas]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
    for x in deltas:
        vals = [v_delta(d, x) for d in range(1, 6)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_v_delta_growth_ratio():
    for d in (2, 3, 4):
        for e in range(8, 21):
            n = 2 ** e
            delta = math.log(n) / n
            ratio = v_delta(d, delta) / (delta * math.log(1 / delta) ** (d - 1))
            assert 1 / math.factorial(d - 1) <= ratio <= d


def test_v_delta_mc_certain():
    r = v_delta_mc(3, 1.0, 1000)
    assert r.estimate == 1.0 and r.stderr == 0.0


@pytest.mark.parametrize("d,delta", [(2, 0.1), (3, 0.01)])
def test_v_delta_mc_agrees(d, delta):
    r = v_delta_mc(d, delta, 1_000_000, seed=123)
    assert abs(r.estimate - v_delta(d, delta)) <= 4 * r.stderr


def test_harmonic():
    assert harmonic(1) == 1.0
    assert harmonic(4) == pytest.approx(25 / 12)
    assert harmonic(4096) == pytest.approx(math.fsum(1 / i for i in range(1, 4097)), rel=1e-14)
    assert harmonic(4096) == pytest.approx(8.8951, abs=1e-4)
