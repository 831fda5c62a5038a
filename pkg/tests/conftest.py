import numpy as np
import pytest

from lpcop import load_dataset


@pytest.fixture(scope="session")
def hellman():
    return load_dataset("hellman")


@pytest.fixture(scope="session")
def draft():
    return load_dataset("draft_lottery")


@pytest.fixture(scope="session")
def shunter():
    return load_dataset("shunter")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
