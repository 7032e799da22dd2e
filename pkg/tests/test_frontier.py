import itertools

import numpy as np
import pytest

from octofrontier.frontier import (
    FrontierSet, FrontierTracker, frontier_predicate, full_frontier, update_global_frontier, update_local_frontier,
)
from octofrontier.octree import ChangeSet, OccupancyOctree, VoxelKey, VoxelState

from conftest import random_grid, tree_from_grid

U, F, O = VoxelState.UNKNOWN, VoxelState.FREE, VoxelState.OCCUPIED


def naive_frontier(grid):
    """Double loop over voxels and their face neighbours."""
    out = set()
    nx, ny, nz = grid.shape
    for x, y, z in itertools.product(range(nx), range(ny), range(nz)):
        if grid[x, y, z] != F:
            continue
        for dx, dy, dz in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            a, b, c = x + dx, y + dy, z + dz
            if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz and grid[a, b, c] == U:
                out.add((x, y, z))
                break
    return out


class TestPredicate:
    def test_surrounded_by_free(self):
        tree = tree_from_grid(np.full((3, 3, 3), F, np.uint8))
        assert not frontier_predicate(tree, VoxelKey(1, 1, 1, 16))

    def test_one_unknown_neighbour(self):
        grid = np.full((3, 3, 3), F, np.uint8)
        grid[1, 1, 2] = U
        tree = tree_from_grid(grid)
        assert frontier_predicate(tree, VoxelKey(1, 1, 1, 16))

    def test_out_of_bounds_is_not_unknown(self):
        tree = tree_from_grid(np.full((1, 1, 1), F, np.uint8))
        assert not frontier_predicate(tree, VoxelKey(0, 0, 0, 16))

    def test_diagonal_unknown_needs_26(self):
        grid = np.full((3, 3, 3), F, np.uint8)
        grid[2, 2, 2] = U
        tree = tree_from_grid(grid)
        assert not frontier_predicate(tree, VoxelKey(1, 1, 1, 16))
        assert frontier_predicate(tree, VoxelKey(1, 1, 1, 16), connectivity=26)

    def test_exhaustive_random_grids(self, rng):
        for _ in range(200):
            grid = random_grid(rng, (4, 4, 4))
            tree = tree_from_grid(grid)
            expected = naive_frontier(grid)
            for x, y, z in itertools.product(range(4), repeat=3):
                assert frontier_predicate(tree, VoxelKey(x, y, z, 16)) == ((x, y, z) in expected)
            assert {tuple(c) for c in tree.unravel(full_frontier(tree))} == expected


class TestLocalFrontier:
    def test_empty_changeset(self):
        tree = OccupancyOctree([0, 0, 0], [4, 4, 4], 1.0)
        assert update_local_frontier(tree, ChangeSet(np.empty(0, np.int64), tree.shape, 16)).size == 0

    def test_single_free_voxel_in_unknown(self):
        tree = OccupancyOctree([0, 0, 0], [4, 4, 4], 1.0)
        changed = tree.set_states([[2, 2, 2]], F)
        local = update_local_frontier(tree, changed)
        assert [tuple(c) for c in tree.unravel(local)] == [(2, 2, 2)]

    def test_neighbour_loses_status(self):
        # a frontier voxel whose only unknown neighbour becomes free
        grid = np.full((3, 1, 1), F, np.uint8)
        grid[2, 0, 0] = U
        tree = tree_from_grid(grid)
        assert full_frontier(tree).tolist() == [1]
        changed = tree.set_states([[2, 0, 0]], O)
        assert update_local_frontier(tree, changed).size == 0


class TestGlobalFrontier:
    def test_first_update_equals_local(self):
        tree = OccupancyOctree([0, 0, 0], [4, 4, 4], 1.0)
        changed = tree.set_states([[1, 1, 1], [2, 2, 2]], F)
        local = update_local_frontier(tree, changed)
        fs = update_global_frontier(FrontierSet(), local, tree)
        np.testing.assert_array_equal(fs.global_, local)
        assert fs.iteration == 1

    def test_fully_explored_world_is_empty(self):
        tracker = FrontierTracker(OccupancyOctree([0, 0, 0], [3, 3, 3], 1.0))
        tracker.update(tracker.octree.set_states(np.argwhere(np.ones((3, 3, 3))), F))
        assert tracker.frontiers.global_.size == 0

    def test_stale_keys_removed(self):
        # 10 x 3 x 1 corridor: the middle row first, then both side rows past it
        tree = OccupancyOctree([0, 0, 0], [10, 3, 1], 1.0)
        tracker = FrontierTracker(tree)
        tracker.update(tree.integrate_cloud([[4.5, 1.5, 0.5]], [0.5, 1.5, 0.5]))
        first = set(tracker.frontiers.global_.tolist())
        assert first
        for y in (0.5, 2.5):
            tracker.update(tree.integrate_cloud([[9.5, y, 0.5]], [0.5, y, 0.5]))
        final = tracker.frontiers.global_
        np.testing.assert_array_equal(final, full_frontier(tree))
        assert first.isdisjoint(final.tolist())

    def test_key_views(self):
        tree = OccupancyOctree([0, 0, 0], [4, 4, 4], 1.0)
        tracker = FrontierTracker(tree)
        fs = tracker.update(tree.set_states([[2, 2, 2]], F))
        assert fs.global_keys(tree) == {VoxelKey(2, 2, 2, 16)}
        assert fs.local_keys(tree) <= fs.global_keys(tree)

    @pytest.mark.parametrize("connectivity", [6, 26])
    def test_incremental_equals_full_recompute(self, rng, connectivity):
        for _ in range(15):
            shape = rng.integers(3, 17, size=3)
            tree = OccupancyOctree([0, 0, 0], shape, 1.0)
            tracker = FrontierTracker(tree, connectivity)
            for _ in range(6):
                origin = rng.uniform(0, shape)
                changed = tree.integrate_cloud(rng.uniform(0, shape, size=(rng.integers(1, 25), 3)), origin)
                fs = tracker.update(changed)
                np.testing.assert_array_equal(fs.global_, full_frontier(tree, connectivity))
                assert set(fs.local.tolist()) <= set(fs.global_.tolist())
