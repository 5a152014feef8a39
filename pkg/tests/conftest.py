"""Shared fixtures and the acceptance-verdict terminal summary."""

import numpy as np
import pytest

from oracles import acceptance_verdicts


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    """Echo one verdict line per acceptance criterion after the run."""
    if acceptance_verdicts:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_verdicts:
            terminalreporter.write_line(line)
