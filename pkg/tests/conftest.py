import numpy as np
import pytest

from tracerflow import build_power_law_spectrum, spectrum_from_tables

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def default_model():
    """d=2, K=8, m=3, alpha=0.5, energy |k|^-14 P_incompressible, gamma |k|^2."""
    return build_power_law_spectrum(2, 8, 1.0, 14.0, "incompressible", 1.0, 2.0)


@pytest.fixture(scope="session")
def small_model():
    return build_power_law_spectrum(2, 4, 1.0, 14.0, "incompressible", 1.0, 2.0)


@pytest.fixture(scope="session")
def full_k2_model():
    """Flat-ish full-projection model with non-negligible high modes."""
    return build_power_law_spectrum(2, 2, 1.0, 2.0, "full", 1.0, 2.0)


def single_pair_model(k=(1, 0), gamma=1.0, energy=None, d=2, m=3, alpha=0.5):
    if energy is None:
        energy = np.eye(d)
    K = max(abs(c) for c in k)
    return spectrum_from_tables(d, K, {tuple(k): (gamma, energy)}, m=m, alpha=alpha)


def zero_energy_model(gammas=None, d=2, K=1):
    entries = gammas or {(1, 0): 1.0, (0, 1): 1.0}
    table = {k: (g, np.zeros((d, d))) for k, g in entries.items()}
    return spectrum_from_tables(d, K, table)
