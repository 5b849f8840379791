import numpy as np
import pytest

from distinterf.modes import DistinguishabilityMatrix


def random_gram(n, rng, dim=None):
    """Gram matrix of n random normalized vectors in a dim-dimensional space."""
    dim = dim or n
    v = rng.normal(size=(dim, n)) + 1j * rng.normal(size=(dim, n))
    v /= np.linalg.norm(v, axis=0)
    g = v.conj().T @ v
    g = 0.5 * (g + g.conj().T)
    np.fill_diagonal(g, 1.0)
    return DistinguishabilityMatrix(g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
