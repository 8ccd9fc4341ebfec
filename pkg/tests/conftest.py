import math
import sys

import numpy as np
import pytest

from gradexplore.world import SensorSpec, WorldMap


def box_world(m: int, n: int, res: float = 0.3, inner=()) -> WorldMap:
    """Closed rectangle of m x n cells; ``inner`` lists extra obstacle cells."""
    cells = np.zeros((m, n), dtype=bool)
    cells[0, :] = cells[-1, :] = True
    cells[:, 0] = cells[:, -1] = True
    for i, j in inner:
        cells[i, j] = True
    return WorldMap(cells, res)


@pytest.fixture
def spec() -> SensorSpec:
    return SensorSpec()


@pytest.fixture
def wide_spec() -> SensorSpec:
    return SensorSpec(max_range=1.5, fov=math.radians(120), angular_resolution=math.radians(2),
                      beam_aperture=math.radians(2))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
