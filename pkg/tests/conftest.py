import pytest

from insiderdrift.market import MarketCoefficients

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def pure_jump():
    """The pure-jump market used throughout the acceptance scenarios."""
    return MarketCoefficients.constant(rho=0.0, mu=-0.05, sigma=0.0, theta=1.0, lam=1.0, horizon=1.0)


@pytest.fixture
def mixed():
    return MarketCoefficients.constant(rho=0.0, mu=0.04, sigma=0.2, theta=1.0, lam=1.0, horizon=1.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
