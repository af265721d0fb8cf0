import numpy as np
import pytest

from lanesim import router
from lanesim import scenario as sc

# acceptance results registry; populated by tests/test_acceptance.py
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}  {detail}")


@pytest.fixture(scope="session")
def grid_2x2():
    scn = sc.generate_grid(2, 2, 120.0, 1, 8, seed=7)
    router.complete_routes(scn, target_speed=12.0)
    return scn


@pytest.fixture(scope="session")
def straight_map():
    return sc.generate_straight(400.0, 2, max_speed=30.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
