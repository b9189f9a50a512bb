import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from patchbounds.pipeline import RunConfig, ground_state  # noqa: E402

MIDDLE = (49, 50)


@pytest.fixture(scope="session")
def chain_states():
    """N=100, D=20 ground states, computed once per session on first use."""
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = ground_state(RunConfig(model=name))
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.REPORT):
        terminalreporter.write_line(line)
