"""Scan batching into submaps and the replay scan file format."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

# Surface hits sit exactly on an obstacle face; pushing them a hair further
# along the beam puts them in the cell behind the face, i.e. inside the solid.
_HIT_NUDGE = 1e-6


@dataclass(frozen=True)
class LidarScan:
    points: np.ndarray
    origin: np.ndarray
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))


@dataclass(frozen=True)
class SubmapCloud:
    """One point per occupied cell of a completed submap, at the cell center."""

    points: np.ndarray
    source_submap_index: int
    origin: np.ndarray
    scan_origins: np.ndarray
    scan_indices: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("points", "origin", "scan_origins"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Submap:
    cell_size: float
    occupied_cells: set = field(default_factory=set)
    scan_count: int = 0
    completed: bool = False
    scan_origins: list = field(default_factory=list)
    scan_indices: list = field(default_factory=list)


class SubmapPipeline:
    """Accumulates ``n_scans`` consecutive scans per submap.

    Cell ``c`` spans ``[origin + c * cell_size, origin + (c + 1) * cell_size)``.
    With ``grid_shape`` given, hits on the upper face of the grid (e.g. a solid
    boundary wall) are clamped into the last cell layer.
    """

    def __init__(self, n_scans: int = 10, cell_size: float = 0.5, origin=(0.0, 0.0, 0.0), grid_shape=None):
        if n_scans < 1:
            raise ValueError("n_scans must be >= 1")
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.n_scans = int(n_scans)
        self.cell_size = float(cell_size)
        self.origin = np.asarray(origin, dtype=float).reshape(3)
        self.grid_shape = None if grid_shape is None else np.asarray(grid_shape, dtype=np.int64)
        self.current = Submap(self.cell_size)
        self.completed_count = 0

    def cells_of(self, scan: LidarScan) -> np.ndarray:
        pts = scan.points
        if len(pts) == 0:
            return np.empty((0, 3), np.int64)
        ray = pts - scan.origin
        norm = np.linalg.norm(ray, axis=1, keepdims=True)
        ray = np.divide(ray, norm, out=np.zeros_like(ray), where=norm > 0)
        cells = np.floor((pts + _HIT_NUDGE * ray - self.origin) / self.cell_size).astype(np.int64)
        if self.grid_shape is not None:
            extent = self.grid_shape * self.cell_size
            rel = pts - self.origin
            inside = np.all((rel >= -1e-9) & (rel <= extent + 1e-9), axis=1)
            clipped = np.clip(cells, 0, self.grid_shape - 1)
            cells = np.where(inside[:, None], clipped, cells)
        return cells

    def accumulate_scan(self, scan: LidarScan) -> SubmapCloud | None:
        sub = self.current
        sub.occupied_cells.update(map(tuple, self.cells_of(scan).tolist()))
        sub.scan_count += 1
        sub.scan_origins.append(scan.origin)
        sub.scan_indices.append(scan.index)
        if sub.scan_count < self.n_scans:
            return None

        sub.completed = True
        cells = np.array(sorted(sub.occupied_cells), dtype=float).reshape(-1, 3)
        origins = np.array(sub.scan_origins)
        cloud = SubmapCloud(
            points=self.origin + (cells + 0.5) * self.cell_size,
            source_submap_index=self.completed_count,
            origin=origins.mean(axis=0),
            scan_origins=origins,
            scan_indices=tuple(sub.scan_indices),
        )
        self.completed_count += 1
        self.current = Submap(self.cell_size)
        return cloud


def write_scans(fh: IO[str], scans: Iterable[LidarScan]) -> None:
    for scan in scans:
        o = scan.origin
        fh.write(f"SCAN {scan.index} {o[0]:.6f} {o[1]:.6f} {o[2]:.6f} {len(scan.points)}\n")
        for x, y, z in scan.points:
            fh.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def load_scans(path: str | os.PathLike) -> list[LidarScan]:
    """Read a replay file: ``SCAN k ox oy oz n`` headers each followed by n ``x y z`` lines."""
    scans = []
    with open(path) as fh:
        lines = iter(enumerate(fh, start=1))
        for lineno, line in lines:
            parts = line.split()
            if not parts:
                continue
            if parts[0] != "SCAN" or len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 'SCAN k ox oy oz n'")
            try:
                index, n = int(parts[1]), int(parts[5])
                origin = [float(v) for v in parts[2:5]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed scan header") from None
            pts = np.empty((n, 3))
            for i in range(n):
                try:
                    lineno, line = next(lines)
                except StopIteration:
                    raise ValueError(f"{path}:{lineno}: scan {index} ends after {i} of {n} points") from None
                coords = line.split()
                if len(coords) != 3:
                    raise ValueError(f"{path}:{lineno}: expected 'x y z'")
                try:
                    pts[i] = [float(v) for v in coords]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric coordinate") from None
            scans.append(LidarScan(pts, origin, index))
    return scans
