import numpy as np
import pytest

from hplab.rng import replicate_streams


@pytest.fixture
def streams():
    """``streams(n, role=0, seed=11)`` -> one stream per replicate."""

    def make(n, role=0, seed=11):
        return replicate_streams(seed, range(n), role)

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def random_hermitian(rng, n, scale=1.0):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (A + A.conj().T) / 2


def random_unitary(rng, n):
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(A)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
