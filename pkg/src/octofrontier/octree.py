"""Tri-state occupancy octree over a bounded world.

Finest-depth content lives in a dense ``uint8`` grid; coarser depths are a
max-pooled pyramid of "any occupied" / "any unknown" flags rebuilt lazily
after each mutation.  Keys are integer voxel coordinates measured from the
lower corner of the bounds, so a key at depth ``d`` covers the finest voxels
``[ix << s, (ix + 1) << s)`` with ``s = max_depth - d``.
"""

from __future__ import annotations

import enum
import math
from typing import IO, Iterable, Iterator, NamedTuple

import numpy as np

from .raytrace import traverse_batch

DEFAULT_MAX_DEPTH = 16
_BOUNDS_TOL = 1e-9


class VoxelState(enum.IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class VoxelKey(NamedTuple):
    ix: int
    iy: int
    iz: int
    depth: int


class InvalidQuery(ValueError):
    """Raised for keys or regions that do not address the map."""


def parent_key(key: VoxelKey, target_depth: int) -> VoxelKey:
    if target_depth > key.depth:
        raise InvalidQuery(f"target depth {target_depth} is below key depth {key.depth}")
    if target_depth < 1:
        raise InvalidQuery(f"depth must be >= 1, got {target_depth}")
    s = key.depth - target_depth
    return VoxelKey(key.ix >> s, key.iy >> s, key.iz >> s, target_depth)


class ChangeSet:
    """Finest-depth voxels whose state changed in one map update.

    Stored as sorted flat grid indices; :meth:`keys` gives the ``VoxelKey`` view.
    """

    __slots__ = ("indices", "shape", "depth")

    def __init__(self, indices: np.ndarray, shape: tuple[int, int, int], depth: int):
        self.indices = np.unique(np.asarray(indices, dtype=np.int64))
        self.shape = shape
        self.depth = depth

    def __len__(self) -> int:
        return int(self.indices.size)

    def __iter__(self) -> Iterator[VoxelKey]:
        for ix, iy, iz in self.coords():
            yield VoxelKey(int(ix), int(iy), int(iz), self.depth)

    def __contains__(self, key) -> bool:
        if not isinstance(key, tuple) or len(key) != 4 or key[3] != self.depth:
            return False
        nx, ny, nz = self.shape
        if not (0 <= key[0] < nx and 0 <= key[1] < ny and 0 <= key[2] < nz):
            return False
        flat = np.ravel_multi_index(key[:3], self.shape)
        i = np.searchsorted(self.indices, flat)
        return bool(i < self.indices.size and self.indices[i] == flat)

    def coords(self) -> np.ndarray:
        if self.indices.size == 0:
            return np.empty((0, 3), np.int64)
        return np.stack(np.unravel_index(self.indices, self.shape), axis=1)

    def keys(self) -> set[VoxelKey]:
        return set(self)

    def __repr__(self) -> str:
        return f"ChangeSet({len(self)} voxels)"


class OccupancyOctree:
    """Bounded tri-state voxel map with depth-addressed queries.

    Integration is deterministic: the endpoint voxel of every ray becomes
    Occupied, voxels crossed on the way become Free only if still Unknown,
    and nothing ever returns to Unknown.
    """

    def __init__(self, bounds_min, bounds_max, resolution: float, max_depth: int = DEFAULT_MAX_DEPTH):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        if not 1 <= max_depth <= 16:
            raise ValueError("max_depth must be in [1, 16]")
        self.bounds_min = np.asarray(bounds_min, dtype=float).reshape(3)
        self.bounds_max = np.asarray(bounds_max, dtype=float).reshape(3)
        if np.any(self.bounds_max <= self.bounds_min):
            raise ValueError("bounds_max must exceed bounds_min on every axis")
        self.resolution = float(resolution)
        self.max_depth = int(max_depth)
        extent = (self.bounds_max - self.bounds_min) / self.resolution
        self.shape = tuple(int(max(1, math.ceil(e - 1e-9))) for e in extent)
        if max(self.shape) > (1 << self.max_depth):
            raise ValueError(f"grid {self.shape} does not fit in depth {self.max_depth}")
        self._grid = np.zeros(self.shape, dtype=np.uint8)
        self.revision = 0
        self.skipped_points = 0
        self._pyramid: dict[int, tuple[np.ndarray, np.ndarray]] | None = None
        self._unknown_sat: np.ndarray | None = None

    # -- geometry -------------------------------------------------------

    @property
    def grid(self) -> np.ndarray:
        """Read-only view of finest-depth states (``VoxelState`` codes)."""
        view = self._grid.view()
        view.flags.writeable = False
        return view

    @property
    def n_voxels(self) -> int:
        return int(self._grid.size)

    def voxel_size(self, depth: int) -> float:
        return self.resolution * 2 ** (self.max_depth - depth)

    def level_shape(self, depth: int) -> tuple[int, int, int]:
        s = self.max_depth - depth
        return tuple(-(-n >> s) for n in self.shape)

    def in_bounds(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.all((p >= self.bounds_min - _BOUNDS_TOL) & (p <= self.bounds_max + _BOUNDS_TOL), axis=1)

    def voxel_coords(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Finest voxel coordinates of ``points`` and an in-bounds mask.

        Points on the upper bounds face belong to the last voxel layer.
        """
        p = np.asarray(points, dtype=float).reshape(-1, 3)
        ok = self.in_bounds(p)
        idx = np.floor((p - self.bounds_min) / self.resolution).astype(np.int64)
        idx = np.clip(idx, 0, np.asarray(self.shape) - 1)
        return idx, ok

    def key_at(self, point, depth: int | None = None) -> VoxelKey:
        idx, ok = self.voxel_coords(point)
        if not ok[0]:
            raise InvalidQuery(f"point {tuple(point)} is outside the map bounds")
        key = VoxelKey(int(idx[0, 0]), int(idx[0, 1]), int(idx[0, 2]), self.max_depth)
        return key if depth is None else parent_key(key, depth)

    def key_center(self, key: VoxelKey) -> np.ndarray:
        size = self.voxel_size(key.depth)
        return self.bounds_min + (np.array(key[:3], dtype=float) + 0.5) * size

    def centers(self, coords, depth: int | None = None) -> np.ndarray:
        depth = self.max_depth if depth is None else depth
        c = np.asarray(coords, dtype=float).reshape(-1, 3)
        return self.bounds_min + (c + 0.5) * self.voxel_size(depth)

    def clipped_centers(self, coords, depth: int) -> np.ndarray:
        """Centers of the in-bounds part of each voxel (coarse voxels may overhang)."""
        c = np.asarray(coords, dtype=float).reshape(-1, 3)
        size = self.voxel_size(depth)
        lo = np.maximum(self.bounds_min + c * size, self.bounds_min)
        hi = np.minimum(self.bounds_min + (c + 1) * size, self.bounds_max)
        return (lo + hi) / 2.0

    def flat_index(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        return np.ravel_multi_index((c[:, 0], c[:, 1], c[:, 2]), self.shape)

    def unravel(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=np.int64)
        if flat.size == 0:
            return np.empty((0, 3), np.int64)
        return np.stack(np.unravel_index(flat, self.shape), axis=1)

    def _check_key(self, key: VoxelKey) -> None:
        if not 1 <= key.depth <= self.max_depth:
            raise InvalidQuery(f"depth {key.depth} outside [1, {self.max_depth}]")
        shape = self.level_shape(key.depth)
        if not all(0 <= c < n for c, n in zip(key[:3], shape)):
            raise InvalidQuery(f"key {key} is outside the map bounds")

    # -- queries ---------------------------------------------------------

    def _levels(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        if self._pyramid is None:
            occ = self._grid == VoxelState.OCCUPIED
            unk = self._grid == VoxelState.UNKNOWN
            levels = {self.max_depth: (occ, unk)}
            for depth in range(self.max_depth - 1, 0, -1):
                occ, unk = _pool(occ), _pool(unk)
                levels[depth] = (occ, unk)
            self._pyramid = levels
        return self._pyramid

    def state_at(self, key: VoxelKey) -> VoxelState:
        """State of ``key``; coarse nodes use Occupied > Unknown > Free."""
        self._check_key(key)
        if key.depth == self.max_depth:
            return VoxelState(int(self._grid[key.ix, key.iy, key.iz]))
        occ, unk = self._levels()[key.depth]
        if occ[key.ix, key.iy, key.iz]:
            return VoxelState.OCCUPIED
        if unk[key.ix, key.iy, key.iz]:
            return VoxelState.UNKNOWN
        return VoxelState.FREE

    def states(self, coords) -> np.ndarray:
        """Finest-depth states for an ``(n, 3)`` coordinate array (must be in bounds)."""
        c = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        return self._grid[c[:, 0], c[:, 1], c[:, 2]]

    def volume_fractions(self) -> tuple[float, float, float]:
        counts = np.bincount(self._grid.ravel(), minlength=3)
        n = float(self._grid.size)
        return tuple(float(counts[s] / n) for s in (VoxelState.FREE, VoxelState.OCCUPIED, VoxelState.UNKNOWN))

    def _unknown_table(self) -> np.ndarray:
        if self._unknown_sat is None:
            unk = (self._grid == VoxelState.UNKNOWN).astype(np.int64)
            sat = np.zeros(tuple(n + 1 for n in self.shape), dtype=np.int64)
            sat[1:, 1:, 1:] = unk.cumsum(0).cumsum(1).cumsum(2)
            self._unknown_sat = sat
        return self._unknown_sat

    def cube_index_range(self, center, side: float) -> tuple[np.ndarray, np.ndarray]:
        """Half-open finest index range of the voxel centers inside a cube."""
        i0, i1 = self._cube_ranges(np.asarray(center, dtype=float).reshape(1, 3), side)
        return i0[0], i1[0]

    def _cube_ranges(self, centers: np.ndarray, side: float):
        half = side / 2.0
        lo = (centers - half - self.bounds_min) / self.resolution - 0.5
        hi = (centers + half - self.bounds_min) / self.resolution - 0.5
        shape = np.asarray(self.shape)
        i0 = np.clip(np.ceil(lo - 1e-9).astype(np.int64), 0, shape)
        i1 = np.clip(np.floor(hi + 1e-9).astype(np.int64) + 1, 0, shape)
        return i0, i1

    def unknown_fractions(self, centers, side: float) -> np.ndarray:
        """Vectorised :meth:`unknown_fraction_in_cube` over an ``(n, 3)`` array."""
        if not side > 0:
            raise ValueError("cube side must be positive")
        centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        i0, i1 = self._cube_ranges(centers, side)
        empty = np.any(i1 <= i0, axis=1)
        i1 = np.maximum(i1, i0)
        sat = self._unknown_table()
        x0, y0, z0 = i0.T
        x1, y1, z1 = i1.T
        unknown = (
            sat[x1, y1, z1] - sat[x0, y1, z1] - sat[x1, y0, z1] - sat[x1, y1, z0]
            + sat[x0, y0, z1] + sat[x0, y1, z0] + sat[x1, y0, z0] - sat[x0, y0, z0]
        )
        total = np.prod(i1 - i0, axis=1)
        out = np.zeros(len(centers))
        np.divide(unknown, total, out=out, where=~empty)
        return out

    def unknown_fraction_in_cube(self, center, side: float) -> float:
        """Share of finest voxel centers inside the cube that are Unknown.

        The cube is clipped to the bounds; a cube with no voxel centers gives 0.
        """
        return float(self.unknown_fractions(center, side)[0])

    # -- mutation --------------------------------------------------------

    def drop_caches(self) -> None:
        """Forget the derived pyramid and unknown-count table."""
        self._pyramid = None
        self._unknown_sat = None

    def _touch(self) -> None:
        self.revision += 1
        self.drop_caches()

    def set_states(self, coords, state: VoxelState) -> ChangeSet:
        """Assign ``state`` directly to finest voxels (fixtures and tooling)."""
        c = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
        flat = self.flat_index(c) if len(c) else np.empty(0, np.int64)
        before = self._grid.ravel()[flat]
        self._grid.ravel()[flat] = state
        self._touch()
        return ChangeSet(flat[before != state], self.shape, self.max_depth)

    def integrate_cloud(self, cloud, sensor_origin) -> ChangeSet:
        """Trace rays from ``sensor_origin`` to every point of ``cloud``.

        ``cloud`` is a ``SubmapCloud`` or an ``(n, 3)`` array.  Points outside
        the bounds are skipped and tallied in ``skipped_points``.
        """
        points = getattr(cloud, "points", cloud)
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        origin = np.asarray(sensor_origin, dtype=float).reshape(3)
        if not self.in_bounds(origin)[0]:
            raise InvalidQuery(f"sensor origin {tuple(origin)} is outside the map bounds")

        end_vox, ok = self.voxel_coords(points)
        self.skipped_points += int(np.count_nonzero(~ok))
        points, end_vox = points[ok], end_vox[ok]
        if len(points) == 0:
            self._touch()
            return ChangeSet(np.empty(0, np.int64), self.shape, self.max_depth)

        start_vox, _ = self.voxel_coords(origin)
        u0 = (origin - self.bounds_min) / self.resolution
        u1 = (points - self.bounds_min) / self.resolution
        _, crossed = traverse_batch(
            np.broadcast_to(u0, u1.shape), u1, np.broadcast_to(start_vox[0], end_vox.shape), end_vox
        )

        flat_grid = self._grid.ravel()
        hit = np.unique(self.flat_index(end_vox))
        passed = np.unique(self.flat_index(crossed)) if len(crossed) else np.empty(0, np.int64)
        touched = np.union1d(hit, passed)
        before = flat_grid[touched].copy()

        flat_grid[hit] = VoxelState.OCCUPIED
        if passed.size:
            unknown = passed[flat_grid[passed] == VoxelState.UNKNOWN]
            flat_grid[unknown] = VoxelState.FREE

        changed = touched[flat_grid[touched] != before]
        self._touch()
        return ChangeSet(changed, self.shape, self.max_depth)

    # -- snapshot I/O ----------------------------------------------------

    def write_snapshot(self, fh: IO[str]) -> None:
        """Header ``r_max d_max min.. max..``, then ``ix iy iz state`` per known voxel."""
        lo, hi = self.bounds_min, self.bounds_max
        fh.write(
            f"{self.resolution:.6f} {self.max_depth} "
            f"{lo[0]:.6f} {lo[1]:.6f} {lo[2]:.6f} {hi[0]:.6f} {hi[1]:.6f} {hi[2]:.6f}\n"
        )
        known = np.flatnonzero(self._grid.ravel() != VoxelState.UNKNOWN)
        write_voxel_records(fh, self.unravel(known), self._grid.ravel()[known])

    @classmethod
    def read_snapshot(cls, fh: IO[str]) -> "OccupancyOctree":
        header = fh.readline().split()
        if len(header) != 8:
            raise ValueError("snapshot header must have 8 fields")
        tree = cls(
            [float(v) for v in header[2:5]], [float(v) for v in header[5:8]],
            float(header[0]), int(header[1]),
        )
        names = {s.name.lower(): s for s in VoxelState}
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4 or parts[3] not in names:
                raise ValueError(f"line {lineno}: expected 'ix iy iz state'")
            tree._grid[int(parts[0]), int(parts[1]), int(parts[2])] = names[parts[3]]
        tree._touch()
        return tree


def write_voxel_records(fh: IO[str], coords: np.ndarray, states: Iterable[int]) -> None:
    for (ix, iy, iz), s in zip(np.asarray(coords).reshape(-1, 3), states):
        fh.write(f"{ix} {iy} {iz} {VoxelState(int(s)).name.lower()}\n")


def _pool(mask: np.ndarray) -> np.ndarray:
    """2x2x2 logical-or pooling, padding odd dimensions with False."""
    pad = [(0, n % 2) for n in mask.shape]
    if any(p[1] for p in pad):
        mask = np.pad(mask, pad)
    nx, ny, nz = (n // 2 for n in mask.shape)
    return mask.reshape(nx, 2, ny, 2, nz, 2).any(axis=(1, 3, 5))
