import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


def random_pd(rng, p, kappa=10.0):
    """Random SPD matrix with condition number ``kappa``."""
    q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    w = np.geomspace(kappa, 1.0, p) if p > 1 else np.ones(1)
    s = (q * w) @ q.T
    return 0.5 * (s + s.T)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
