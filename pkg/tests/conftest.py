import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pplab.geometry import SiteSet
from pplab.random_model import sample_site_set

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_sites(locs, attrs, ids=None):
    locs = np.asarray(locs, dtype=float)
    attrs = np.asarray(attrs, dtype=float)
    if attrs.ndim == 1:
        attrs = attrs.reshape(-1, 1)
    if ids is None:
        ids = np.arange(len(locs))
    return SiteSet(attrs.shape[1], ids, locs, attrs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def sites10():
    return sample_site_set(10, 2, seed=11)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_report():
    def report(number: int, title: str, passed: bool, summary: str, seconds: float) -> None:
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {summary} [{seconds:.1f}s]"
        _ACCEPTANCE.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
