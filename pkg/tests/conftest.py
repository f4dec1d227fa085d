import numpy as np
import pytest

from ptydip.forward import Geometry


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_geometry():
    """9x9 Gaussian probe, sigma 1.5, shift 2, one-probe-width padding of a 28x28 image."""
    g = Geometry(probe_size=9, sigma=1.5, shift=2)
    return g, g.probe(), g.scan((28, 28))


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
