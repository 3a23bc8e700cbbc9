import pytest

from nlkg.classify import soliton_on
from nlkg.grid import make_grid
from nlkg.soliton import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams(7.0)


@pytest.fixture(scope="session")
def grid():
    return make_grid(30.0, 960)


@pytest.fixture(scope="session")
def sol(params, grid):
    return soliton_on(params, grid)


@pytest.fixture(scope="session")
def wide_grid():
    return make_grid(40.0, 2048)


@pytest.fixture(scope="session")
def measure(params, wide_grid):
    from nlkg import spectral

    return spectral.spectral_measure(spectral.assemble_L("plus", params, wide_grid))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
