import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hiergrain.config import SimulationConfig


@pytest.fixture
def small_config():
    return SimulationConfig(pop_size=60, num_labels=3, num_issues=2, num_choices=3,
                            multi_issue_discourse=2, strength_of_influence=5,
                            prob_dropping_label=0.01, max_timesteps=400,
                            snapshot_interval=100, equilibrium_window=100, seed=11)


# one verdict line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
