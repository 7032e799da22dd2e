import json

import numpy as np
import pytest

from octofrontier.octree import OccupancyOctree, VoxelState


def random_grid(rng, shape, p=(0.4, 0.4, 0.2)):
    """Tri-state grid drawn with probabilities (unknown, free, occupied)."""
    return rng.choice(np.array([VoxelState.UNKNOWN, VoxelState.FREE, VoxelState.OCCUPIED], np.uint8),
                      size=shape, p=p)


def tree_from_grid(grid, resolution=1.0):
    grid = np.asarray(grid, dtype=np.uint8)
    tree = OccupancyOctree([0, 0, 0], np.asarray(grid.shape) * resolution, resolution)
    for state in (VoxelState.FREE, VoxelState.OCCUPIED):
        tree.set_states(np.argwhere(grid == state), state)
    return tree


def small_room(**overrides):
    """6 x 6 x 3 m boxed room with one pillar; explores in a few seconds."""
    data = {
        "bounds": [[0, 0, 0], [6, 6, 3]],
        "obstacles": [[[3.0, 2.0, 0.0], [3.5, 4.0, 3.0]]],
        "start": [1.25, 1.25, 1.5],
        "sensor": {"range": 8, "beams": 8, "fov": 60, "azimuth_step": 4, "rate": 10},
        "planner": {"r_max": 0.5, "d_exp": 15, "bandwidth": 2.0, "lambda": 0.1386,
                    "gain_cube_side": 4.0, "N_s": 5, "safety_margin": 0.3},
        "seed": 3,
        "max_sim_time": 300,
    }
    data.update(overrides)
    return data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def room_file(tmp_path):
    path = tmp_path / "room.json"
    path.write_text(json.dumps(small_room()))
    return path


# -- acceptance verdict lines ------------------------------------------------

_VERDICTS = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if not item.nodeid.startswith("tests/test_acceptance.py"):
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = dict(item.user_properties).get("detail", "")
        _VERDICTS.append(("PASS" if rep.passed else "FAIL", doc, detail))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for verdict, doc, detail in _VERDICTS:
        terminalreporter.write_line(f"{verdict}  {doc}" + (f"  [{detail}]" if detail else ""))
