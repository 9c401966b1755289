import numpy as np
import pytest

from misslasso.core import MaskedMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_masked(rng, n, p, alpha=0.6):
    return MaskedMatrix(rng.standard_normal((n, p)), rng.random((n, p)) < alpha)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
