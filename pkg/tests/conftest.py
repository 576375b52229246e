import sys

import numpy as np
import pytest

from polaronqd.spectra import bath_transform
from polaronqd.spectral_density import PhononModel


@pytest.fixture(scope="session")
def bulk():
    return PhononModel.superohmic_bulk(2.0)


@pytest.fixture(scope="session")
def bulk_transform(bulk):
    return bath_transform(bulk, 0.1, 1e-3)


@pytest.fixture(scope="session")
def bulk_transform_t0(bulk):
    return bath_transform(bulk, 0.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
