import numpy as np
import pytest

from paretoapc import cellnet


@pytest.fixture(scope="session")
def tiny_scenario():
    """2 cells, 2 subcarriers: small enough for grid oracles."""
    return cellnet.generate_scenario(cellnet.ScenarioConfig(n_cells=2, n_subcarriers=2), seed=7)


@pytest.fixture(scope="session")
def tiny_problem(tiny_scenario):
    base = tiny_scenario.epa_powers()
    prices = cellnet.compute_prices(tiny_scenario, base)
    return cellnet.build_bs_problem(tiny_scenario, 0, base, prices)


@pytest.fixture(scope="session")
def small_scenario():
    return cellnet.generate_scenario(cellnet.ScenarioConfig(n_cells=7, n_subcarriers=16), seed=11)



_ACCEPTANCE = []


@pytest.fixture()
def criterion():
    """Record one acceptance line: ``criterion(n, ok, detail)``; fails the test when not ok."""

    def record(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
