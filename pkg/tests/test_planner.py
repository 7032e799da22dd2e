import numpy as np
import pytest

from octofrontier.octree import OccupancyOctree, VoxelState
from octofrontier.sim.planner import PlanningError, VoxelPlanner, clearance_structure, path_length, plan_path

F, O = VoxelState.FREE, VoxelState.OCCUPIED


def open_space(size, res=0.5):
    tree = OccupancyOctree([0, 0, 0], size, res)
    tree.set_states(np.argwhere(np.ones(tree.shape, bool)), F)
    return tree


def densify(path, step=0.05):
    pts = [np.asarray(path[0])]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / step)))
        pts.extend(a + (b - a) * k / n for k in range(1, n + 1))
    return np.array(pts)


def box_distance(p, tree, coords):
    lo = tree.bounds_min + coords * tree.resolution
    gap = np.maximum(np.maximum(lo - p, p - (lo + tree.resolution)), 0.0)
    return np.linalg.norm(gap, axis=1)


class TestPlanPath:
    def test_start_equals_goal(self):
        tree = open_space([5, 5, 3])
        path = plan_path(tree, [1.1, 1.2, 1.3], [1.1, 1.2, 1.3], 0.0)
        assert len(path) == 1
        np.testing.assert_array_equal(path[0], [1.1, 1.2, 1.3])

    def test_straight_corridor(self):
        tree = open_space([12, 1.5, 1.5])
        start, goal = np.array([0.75, 0.75, 0.75]), np.array([10.75, 0.75, 0.75])
        path = plan_path(tree, start, goal, 0.0)
        assert path is not None
        assert path_length(path) <= 1.05 * np.linalg.norm(goal - start)
        np.testing.assert_allclose(path[-1], goal)

    def test_walled_off_goal(self):
        tree = open_space([10, 4, 3])
        wall = np.argwhere(np.ones(tree.shape, bool))
        tree.set_states(wall[wall[:, 0] == 10], O)
        assert plan_path(tree, [1, 1, 1], [8, 1, 1], 0.0) is None

    def test_occupied_start(self):
        tree = open_space([5, 5, 3])
        tree.set_states([[2, 2, 2]], O)
        with pytest.raises(PlanningError):
            plan_path(tree, [1.25, 1.25, 1.25], [4, 4, 1], 0.0)

    def test_unknown_is_not_traversable(self):
        tree = OccupancyOctree([0, 0, 0], [5, 1, 1], 0.5)
        tree.set_states([[i, 0, 0] for i in range(10) if i != 5], F)
        assert plan_path(tree, [0.25, 0.25, 0.25], [4.75, 0.25, 0.25], 0.0) is None

    def test_goal_clamped_to_nearest_reachable(self):
        tree = open_space([6, 6, 2])
        col = np.argwhere(np.ones(tree.shape, bool))
        tree.set_states(col[col[:, 0] >= 8], VoxelState.UNKNOWN)
        path = plan_path(tree, [1, 1, 0.75], [4.6, 1.25, 0.75], 0.0, clamp_radius=1.0)
        assert path is not None
        np.testing.assert_allclose(path[-1], [3.75, 1.25, 0.75])
        assert plan_path(tree, [1, 1, 0.75], [5.9, 1.25, 0.75], 0.0, clamp_radius=1.0) is None

    def test_safety_margin_respected(self, rng):
        for _ in range(10):
            tree = open_space([10, 10, 3])
            pillars = rng.integers(2, 18, size=(6, 2))
            for x, y in pillars:
                tree.set_states([[x, y, z] for z in range(6)], O)
            occ = np.argwhere(tree.grid == O)
            margin = 0.6
            path = plan_path(tree, [0.25, 0.25, 1.25], [9.75, 9.75, 1.25], margin)
            if path is None:
                continue
            for p in densify(path)[1:]:
                assert box_distance(p, tree, occ).min() >= margin - 0.25 - 1e-9

    def test_no_corner_cutting(self):
        tree = open_space([1.5, 1.5, 0.5])
        tree.set_states([[1, 0, 0], [0, 1, 0]], O)
        # the only way from (0,0) to (1,1) is through the shared corner
        assert plan_path(tree, [0.25, 0.25, 0.25], [0.75, 0.75, 0.25], 0.0) is None

    def test_start_outside_margin_still_plans(self):
        tree = open_space([6, 3, 3])
        tree.set_states([[0, 3, 3]], O)
        path = plan_path(tree, [0.75, 1.25, 1.25], [5, 1.25, 1.25], 0.5)
        assert path is not None


class TestClearance:
    def test_zero_and_radius(self):
        s = clearance_structure(0.5, 0.5)
        assert s[s.shape[0] // 2, s.shape[1] // 2, s.shape[2] // 2]
        assert s.shape == (5, 5, 5)
        # neighbour one voxel away is at box distance 0.25 < 0.5
        assert s[3, 2, 2]
        # two voxels away along an axis is at 0.75
        assert not s[4, 2, 2]

    def test_planner_reuse(self):
        tree = open_space([5, 5, 2])
        planner = VoxelPlanner(tree, [0.25, 0.25, 0.25], 0.0)
        a = planner.plan([4.75, 4.75, 0.25])
        b = planner.plan([0.25, 4.75, 1.75])
        assert a is not None and b is not None
