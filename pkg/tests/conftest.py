import time

import numpy as np
import pytest

from beamkalman.covariance import AngularSector, ArrayGeometry, GroupProfile, sector_covariance
from beamkalman.harness.config import build_desk_scenario
from beamkalman.harness.experiment import run_experiment, scenario_statistics

# criterion label -> (passed, detail), filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    a = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    r = a @ a.conj().T / rank
    return scale * r / np.trace(r).real


def random_pd(rng, n, floor=0.1):
    return random_psd(rng, n) + floor * np.eye(n)


def random_unit_trace_blocks(rng, n, memory, rank=None):
    return [random_psd(rng, n, rank) for _ in range(memory)]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_config():
    return build_desk_scenario()


@pytest.fixture(scope="session")
def desk_stats(desk_config):
    return scenario_statistics(desk_config)


@pytest.fixture(scope="session")
def small_sector_cov():
    return sector_covariance(ArrayGeometry(8), AngularSector(-10.0, 10.0))


def small_profile(users=2, sectors=((-1.0, 1.0), (5.0, 7.0)), group_id=0):
    return GroupProfile(group_id, users, tuple(AngularSector(lo, hi) for lo, hi in sectors))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: (int(s.split()[0].lstrip("#").rstrip("ab")), s)):
        ok, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


@pytest.fixture(scope="session")
def desk_run(desk_config, desk_stats):
    """The desk preset at its defaults (20 trials); rows, plans and wall time."""
    start = time.perf_counter()
    rows, plans = run_experiment(desk_config, desk_stats)
    return rows, plans, time.perf_counter() - start
