import numpy as np
import pytest

from horolab import fuchsian

# lines appended by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def group():
    return fuchsian.bolza_group()


@pytest.fixture(scope="session")
def ball8(group):
    """Displacement-capped ball; complete radius 8 certifies the trace gap."""
    return fuchsian.enumerate_ball(group, 64, 8.0)


@pytest.fixture(scope="session")
def ball_w3(group):
    return fuchsian.enumerate_ball(group, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
