import numpy as np
import pytest

from helmrecon.config import DEFAULT_BUMPS
from helmrecon.grid import Bump, Grid2D, synth_coefficient

ACCEPTANCE_LINES: dict[int, str] = {}


def default_truth(grid: Grid2D, m: int, amplitude: float = 1.0):
    """Default coefficient truth c_1..c_m (bump peaks scaled by ``amplitude``)."""
    return [
        synth_coefficient(grid, [Bump((x, y), a * amplitude, w) for x, y, a, w in DEFAULT_BUMPS[ell]])
        for ell in range(1, m + 1)
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
