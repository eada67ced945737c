import numpy as np
import pytest

from eicic import NetworkConfig, build_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def desk_config():
    return NetworkConfig()


@pytest.fixture(scope="session")
def desk_scenario(desk_config):
    return build_scenario(desk_config)


@pytest.fixture(scope="session")
def small_config():
    return NetworkConfig(num_ues=30, num_rbs=10)


@pytest.fixture(scope="session")
def small_scenario(small_config):
    return build_scenario(small_config)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def report_criterion(request):
    """Record one pass/fail line; the lines are echoed in the terminal summary."""

    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}"
        print(line)
        request.config.stash[ACCEPTANCE_LINES].append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
