"""Local and global frontier maintenance.

A frontier voxel is a Free finest voxel with at least one Unknown neighbour;
neighbours outside the bounds never count as Unknown.  Sets of voxels are
kept as sorted flat grid indices of the octree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .octree import ChangeSet, OccupancyOctree, VoxelKey, VoxelState

FACE_OFFSETS = np.array(
    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)], dtype=np.int64
)
ALL_OFFSETS = np.array(
    [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)], dtype=np.int64
)


def neighbor_offsets(connectivity: int = 6) -> np.ndarray:
    if connectivity == 6:
        return FACE_OFFSETS
    if connectivity == 26:
        return ALL_OFFSETS
    raise ValueError("connectivity must be 6 or 26")


def frontier_mask(octree: OccupancyOctree, coords, connectivity: int = 6) -> np.ndarray:
    """Vectorised frontier predicate for an ``(n, 3)`` array of finest coordinates."""
    c = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    grid = octree.grid
    result = grid[c[:, 0], c[:, 1], c[:, 2]] == VoxelState.FREE
    if not result.any():
        return result
    shape = np.asarray(octree.shape)
    has_unknown = np.zeros(len(c), dtype=bool)
    for off in neighbor_offsets(connectivity):
        nb = c + off
        inside = np.all((nb >= 0) & (nb < shape), axis=1)
        nbc = np.where(inside[:, None], nb, 0)
        has_unknown |= inside & (grid[nbc[:, 0], nbc[:, 1], nbc[:, 2]] == VoxelState.UNKNOWN)
    return result & has_unknown


def frontier_predicate(octree: OccupancyOctree, key: VoxelKey, connectivity: int = 6) -> bool:
    if key.depth != octree.max_depth:
        raise ValueError("frontier predicate is defined on finest-depth keys")
    return bool(frontier_mask(octree, [key[:3]], connectivity)[0])


def full_frontier(octree: OccupancyOctree, connectivity: int = 6) -> np.ndarray:
    """Flat indices of every frontier voxel in the map (full-grid scan)."""
    grid = octree.grid
    free = grid == VoxelState.FREE
    unknown = np.pad(grid == VoxelState.UNKNOWN, 1)
    nx, ny, nz = grid.shape
    touch = np.zeros_like(free)
    for dx, dy, dz in neighbor_offsets(connectivity):
        touch |= unknown[1 + dx:1 + dx + nx, 1 + dy:1 + dy + ny, 1 + dz:1 + dz + nz]
    return np.flatnonzero(free & touch)


def update_local_frontier(octree: OccupancyOctree, changed: ChangeSet, connectivity: int = 6) -> np.ndarray:
    """Frontier voxels among the changed voxels and their neighbourhood."""
    if len(changed) == 0:
        return np.empty(0, np.int64)
    coords = changed.coords()
    shape = np.asarray(octree.shape)
    parts = [coords]
    for off in neighbor_offsets(connectivity):
        nb = coords + off
        parts.append(nb[np.all((nb >= 0) & (nb < shape), axis=1)])
    candidates = np.unique(octree.flat_index(np.concatenate(parts)))
    return candidates[frontier_mask(octree, octree.unravel(candidates), connectivity)]


@dataclass
class FrontierSet:
    """Local (latest update) and global (filtered union) frontiers."""

    local: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    global_: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    iteration: int = 0

    def local_keys(self, octree: OccupancyOctree) -> set[VoxelKey]:
        return _as_keys(octree, self.local)

    def global_keys(self, octree: OccupancyOctree) -> set[VoxelKey]:
        return _as_keys(octree, self.global_)


def _as_keys(octree, flat) -> set[VoxelKey]:
    d = octree.max_depth
    return {VoxelKey(int(x), int(y), int(z), d) for x, y, z in octree.unravel(flat)}


def update_global_frontier(
    frontiers: FrontierSet, new_local: np.ndarray, octree: OccupancyOctree, connectivity: int = 6
) -> FrontierSet:
    merged = np.union1d(frontiers.global_, np.asarray(new_local, dtype=np.int64))
    keep = frontier_mask(octree, octree.unravel(merged), connectivity) if merged.size else np.zeros(0, bool)
    return FrontierSet(
        local=np.asarray(new_local, dtype=np.int64), global_=merged[keep], iteration=frontiers.iteration + 1
    )


class FrontierTracker:
    """Keeps the frontier in step with an octree, one update per map change."""

    def __init__(self, octree: OccupancyOctree, connectivity: int = 6):
        self.octree = octree
        self.connectivity = connectivity
        self.frontiers = FrontierSet()

    def update(self, changed: ChangeSet) -> FrontierSet:
        local = update_local_frontier(self.octree, changed, self.connectivity)
        self.frontiers = update_global_frontier(self.frontiers, local, self.octree, self.connectivity)
        return self.frontiers
