import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from invplace.core import NetworkInstance, StarNetwork, expand_star  # noqa: E402
from invplace.harness import DOMINANCE  # noqa: E402

# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "run_last: run after every other test in the session")


def pytest_collection_modifyitems(session, config, items):
    last = [it for it in items if it.get_closest_marker("run_last")]
    items[:] = [it for it in items if not it.get_closest_marker("run_last")] + last


@pytest.fixture
def two_by_two():
    return NetworkInstance(np.array([[1.0, 0.4], [0.0, 0.7]]), 2)


@pytest.fixture
def star1():
    return expand_star(StarNetwork(1, 0.5), 2)


@pytest.fixture
def star2():
    return expand_star(StarNetwork(2, 0.5), 6)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    if ACCEPTANCE:
        tr.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            ok, detail = ACCEPTANCE[k]
            tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
    tr.write_line(f"hindsight dominance: {DOMINANCE.checks} simulations, {DOMINANCE.violations} violations "
                  f"(worst excess {DOMINANCE.worst_excess:.3g})")


def pytest_sessionfinish(session, exitstatus):
    # every simulation anywhere in the suite fed the dominance ledger
    if DOMINANCE.violations and session.exitstatus == 0:
        session.exitstatus = 1
