import pytest

from micropolar.model import ModelParams, params_for_mach
from micropolar.stationary import build_profile

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def desk_params() -> ModelParams:
    """gamma = 1.4, M_+ = 1.5, u_b / u_+ = 0.9, omega_b = 0.05."""
    return params_for_mach(1.5, chi0=0.9, omega_b=0.05)


@pytest.fixture(scope="session")
def transonic_params() -> ModelParams:
    # lam = 1.2 makes A = (gamma + 1) rho_+ / (2 lam) = 1
    return params_for_mach(1.0, chi0=1.05, omega_b=0.05, lam=1.2)


@pytest.fixture(scope="session")
def desk_profile(desk_params):
    return build_profile(desk_params, n=1024)


@pytest.fixture(scope="session")
def transonic_profile(transonic_params):
    return build_profile(transonic_params, n=4096)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
