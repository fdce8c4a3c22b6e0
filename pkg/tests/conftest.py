import pytest

from vpcluster.geometry import ViewportSpec, sphere_grid


@pytest.fixture(scope="session")
def grid():
    return sphere_grid(10000)


@pytest.fixture(scope="session")
def spec():
    return ViewportSpec.from_degrees(100.0, 100.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
