import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_stable_discrete(rng, n, rho_max=0.9):
    """Random ``(E, A, B, C)`` with spectral radius of ``E^{-1} A`` below ``rho_max``."""
    from structrealize.sim import DiscreteSystem

    E = np.eye(n) + 0.3 * rng.standard_normal((n, n))
    M = rng.standard_normal((n, n))
    M *= rng.uniform(0.3, rho_max) / max(abs(np.linalg.eigvals(M)))
    return DiscreteSystem(E, E @ M, rng.standard_normal(n), rng.standard_normal(n))
