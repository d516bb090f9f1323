import sys
import numpy as np
import pytest


def random_chain(rng, N, sparsity=0.0, stickiness=0.0):
    """Random column-stochastic matrix with a positive diagonal (hence ergodic when dense enough)."""
    P = rng.random((N, N)) ** 2
    if sparsity:
        P[rng.random((N, N)) < sparsity] = 0.0
    P[np.arange(N), np.arange(N)] += stickiness + 1e-3
    # ring edges keep it irreducible whatever was zeroed
    P[(np.arange(N) + 1) % N, np.arange(N)] += 1e-3
    return P / P.sum(axis=0, keepdims=True)


def sample_chain(rng, P, n, start=None):
    """Sample ``n`` 1-based states from column-stochastic ``P``."""
    N = P.shape[0]
    cum = np.cumsum(P, axis=0)
    cum[-1] = 1.0
    u = rng.random(n)
    x = np.empty(n, dtype=np.int64)
    x[0] = rng.integers(N) if start is None else start
    for i in range(1, n):
        x[i] = np.searchsorted(cum[:, x[i - 1]], u[i], side="right")
    return x + 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
