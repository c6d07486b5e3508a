import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def simulate_arma(n, phi=(), theta=(), sigma=1.0, mean=0.0, seed=0, burn=500):
    """ARMA sample path with the +theta moving-average convention."""
    g = np.random.default_rng(seed)
    e = g.normal(0.0, sigma, n + burn)
    x = np.zeros(n + burn)
    p, q = len(phi), len(theta)
    for t in range(n + burn):
        v = e[t]
        for i in range(1, p + 1):
            if t - i >= 0:
                v += phi[i - 1] * x[t - i]
        for j in range(1, q + 1):
            if t - j >= 0:
                v += theta[j - 1] * e[t - j]
        x[t] = v
    return x[burn:] + mean


_CRITERIA = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it and fail the test when it is red."""
    def check(number, label, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _CRITERIA.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
