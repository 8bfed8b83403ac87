import numpy as np
import pytest

from v2x_aoi.mobility import Direction, VehicleState


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_vehicle(idx, x, y=2.0, speed=20.0, direction=Direction.BACKWARD, lane=3):
    return VehicleState(idx, float(x), float(y), speed, direction, lane)


@pytest.fixture
def line_states():
    """Four vehicles on one lane at 0, 50, 150 and 400 m."""
    return [make_vehicle(i, x) for i, x in enumerate([0.0, 50.0, 150.0, 400.0])]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
