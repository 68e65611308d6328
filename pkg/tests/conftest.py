import numpy as np
import pytest

from causalrd import ArModel, ar_from_poles, build_filter_set, procedure2, psd_from_ar, white
from causalrd.units import to_nats

GOLDEN_RATE_BITS = 0.2601


@pytest.fixture(scope="session")
def ar1():
    return psd_from_ar(ArModel((0.9,), 1.0))


@pytest.fixture(scope="session")
def ar2():
    return psd_from_ar(ar_from_poles([0.9, 0.1], 1.0))


@pytest.fixture(scope="session")
def flat():
    return white(1.0)


@pytest.fixture(scope="session")
def golden_design(ar1):
    return procedure2(ar1, to_nats(GOLDEN_RATE_BITS), order=8, iters=4)


@pytest.fixture(scope="session")
def golden_filters(ar1, golden_design):
    return build_filter_set(ar1, golden_design, taps=64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
