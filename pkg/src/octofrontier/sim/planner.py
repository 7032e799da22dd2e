"""Shortest paths through known-free voxels with an obstacle clearance."""

from __future__ import annotations

import heapq
import itertools
import math

import numpy as np
from scipy import ndimage

from ..octree import InvalidQuery, OccupancyOctree, VoxelState


class PlanningError(RuntimeError):
    pass


def clearance_structure(safety_margin: float, resolution: float) -> np.ndarray:
    """Offsets whose voxel box comes closer than ``safety_margin`` to a voxel center."""
    k = int(math.ceil(safety_margin / resolution + 0.5))
    r = np.arange(-k, k + 1)
    ox, oy, oz = np.meshgrid(r, r, r, indexing="ij")
    gap = np.maximum(np.abs(np.stack([ox, oy, oz])) - 0.5, 0.0) * resolution
    return np.sqrt((gap ** 2).sum(axis=0)) < safety_margin - 1e-12


def traversable_mask(octree: OccupancyOctree, safety_margin: float) -> np.ndarray:
    grid = octree.grid
    free = grid == VoxelState.FREE
    if safety_margin <= 0:
        return free
    occ = grid == VoxelState.OCCUPIED
    blocked = ndimage.binary_dilation(occ, structure=clearance_structure(safety_margin, octree.resolution))
    return free & ~blocked


_OFFSETS = [o for o in itertools.product((-1, 0, 1), repeat=3) if o != (0, 0, 0)]


def _sub_offsets(o):
    """Axis-aligned intermediate moves a diagonal step must not cut through."""
    nz = [i for i in range(3) if o[i]]
    subs = []
    for r in range(1, len(nz)):
        for axes in itertools.combinations(nz, r):
            subs.append(tuple(o[i] if i in axes else 0 for i in range(3)))
    return subs


class VoxelPlanner:
    """A* over one octree revision; reuse it for several goals from the same start."""

    def __init__(self, octree: OccupancyOctree, start, safety_margin: float):
        self.octree = octree
        self.start = np.asarray(start, dtype=float).reshape(3)
        key_idx, ok = octree.voxel_coords(self.start)
        if not ok[0]:
            raise InvalidQuery("start lies outside the map bounds")
        self.start_voxel = tuple(int(v) for v in key_idx[0])
        if octree.grid[self.start_voxel] == VoxelState.OCCUPIED:
            raise PlanningError(f"start {tuple(self.start)} lies in an occupied voxel")

        passable = traversable_mask(octree, safety_margin)
        passable[self.start_voxel] = True
        labels, _ = ndimage.label(passable)
        self.component = labels == labels[self.start_voxel]
        self._padded = None

    def reachable(self, voxel) -> bool:
        return bool(self.component[tuple(voxel)])

    def clamp_goal(self, goal, radius: float):
        """Goal voxel if reachable, else the nearest reachable voxel center within ``radius``."""
        goal = np.asarray(goal, dtype=float).reshape(3)
        idx, ok = self.octree.voxel_coords(goal)
        if ok[0] and self.component[tuple(idx[0])]:
            return tuple(int(v) for v in idx[0])
        i0, i1 = self.octree.cube_index_range(goal, 2 * radius)
        if np.any(i1 <= i0):
            return None
        sub = self.component[i0[0]:i1[0], i0[1]:i1[1], i0[2]:i1[2]]
        cand = np.argwhere(sub) + i0
        if len(cand) == 0:
            return None
        d = np.linalg.norm(self.octree.centers(cand) - goal, axis=1)
        within = d <= radius + 1e-9
        if not within.any():
            return None
        cand, d = cand[within], d[within]
        best = np.lexsort((cand[:, 2], cand[:, 1], cand[:, 0], d))[0]
        return tuple(int(v) for v in cand[best])

    def _graph(self):
        if self._padded is None:
            padded = np.pad(self.component, 1)
            strides = np.array([padded.shape[1] * padded.shape[2], padded.shape[2], 1])
            moves = []
            for o in _OFFSETS:
                subs = [int(np.dot(s, strides)) for s in _sub_offsets(o)]
                moves.append((int(np.dot(o, strides)), math.sqrt(sum(abs(v) for v in o)), subs))
            self._padded = (bytearray(padded.ravel().astype(np.uint8).tobytes()), padded.shape, strides, moves)
        return self._padded

    def search(self, goal_voxel) -> list[tuple[int, int, int]] | None:
        """Voxel sequence from the start voxel to ``goal_voxel``, or ``None``."""
        goal_voxel = tuple(int(v) for v in goal_voxel)
        if not self.reachable(goal_voxel):
            return None
        if goal_voxel == self.start_voxel:
            return [goal_voxel]
        passable, shape, strides, moves = self._graph()
        to_flat = lambda v: int(np.dot(np.asarray(v) + 1, strides))
        s, g = to_flat(self.start_voxel), to_flat(goal_voxel)
        gx, gy, gz = (c + 1 for c in goal_voxel)
        sy, sz = int(strides[0]), int(strides[1])

        def h(n):
            x, rem = divmod(n, sy)
            y, z = divmod(rem, sz)
            return math.sqrt((x - gx) ** 2 + (y - gy) ** 2 + (z - gz) ** 2)

        best = {s: 0.0}
        parent = {s: -1}
        heap = [(h(s), 0.0, s)]
        closed = set()
        while heap:
            _, cost, node = heapq.heappop(heap)
            if node == g:
                break
            if node in closed:
                continue
            closed.add(node)
            for step, w, subs in moves:
                nb = node + step
                if not passable[nb] or nb in closed:
                    continue
                if subs and not all(passable[node + d] for d in subs):
                    continue
                nc = cost + w
                if nc < best.get(nb, math.inf):
                    best[nb] = nc
                    parent[nb] = node
                    heapq.heappush(heap, (nc + h(nb), nc, nb))
        if g not in parent:
            return None
        chain = []
        node = g
        while node != -1:
            x, rem = divmod(node, sy)
            y, z = divmod(rem, sz)
            chain.append((x - 1, y - 1, z - 1))
            node = parent[node]
        return chain[::-1]

    def plan(self, goal, clamp_radius: float = 0.0):
        """Polyline from the start position to the (clamped) goal, or ``None``."""
        if np.array_equal(np.asarray(goal, dtype=float).reshape(3), self.start):
            return [self.start.copy()]
        goal_voxel = self.clamp_goal(goal, clamp_radius)
        if goal_voxel is None:
            return None
        voxels = self.search(goal_voxel)
        if voxels is None:
            return None
        return self.to_polyline(voxels)

    def to_polyline(self, voxels) -> list[np.ndarray]:
        pts = [self.start]
        if len(voxels) == 1 and tuple(voxels[0]) == self.start_voxel:
            goal_center = self.octree.centers([voxels[0]])[0]
            if not np.allclose(goal_center, self.start):
                pts.append(goal_center)
            return pts
        centers = self.octree.centers(np.asarray(voxels[1:]))
        return pts + _drop_collinear(list(centers))


def _drop_collinear(points):
    if len(points) < 3:
        return points
    out = [points[0]]
    for prev, cur, nxt in zip(points, points[1:], points[2:]):
        a, b = cur - prev, nxt - cur
        if np.linalg.norm(np.cross(a, b)) > 1e-9 or np.dot(a, b) < 0:
            out.append(cur)
    out.append(points[-1])
    return out


def plan_path(octree: OccupancyOctree, start, goal, safety_margin: float, clamp_radius: float = 0.0):
    """Collision-free polyline through Free voxels keeping ``safety_margin`` clearance.

    A goal whose voxel is not reachable is moved to the nearest reachable voxel
    within ``clamp_radius``; ``None`` when nothing qualifies.  A start equal to
    the goal gives a single-point path.
    """
    return VoxelPlanner(octree, start, safety_margin).plan(goal, clamp_radius)


def path_length(path) -> float:
    pts = np.asarray(path, dtype=float).reshape(-1, 3)
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum()) if len(pts) > 1 else 0.0
