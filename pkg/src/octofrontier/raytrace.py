"""Incremental voxel traversal (Amanatides & Woo) on a regular grid.

Coordinates passed to these functions are in *voxel units*: a point ``u`` lies
in voxel ``floor(u)``.  Both variants visit exactly the same voxels; the
scalar one exists as a readable reference for tests and single rays.
"""

from __future__ import annotations

import numpy as np

_AXIS_DONE = 3.0e300
_NO_CROSSING = 1.0e300


def _initial_tmax(start, cur, step, delta):
    with np.errstate(divide="ignore", invalid="ignore"):
        boundary = np.where(step > 0, cur + 1.0, cur.astype(float))
        tmax = (boundary - start) / delta
    tmax = np.where((delta == 0) | (np.sign(delta) != step), _NO_CROSSING, tmax)
    return tmax


def traverse(start, end, start_voxel=None, end_voxel=None):
    """Return voxels crossed by the segment start->end, excluding the end voxel.

    ``start_voxel``/``end_voxel`` default to ``floor`` of the endpoints; callers
    that clamp points onto the grid pass them explicitly.  The walk takes one
    face step at a time, so the result has Manhattan-distance length and
    consecutive voxels share a face.  Ties between axes go to x, then y, then z.
    """
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    cur = np.floor(start).astype(np.int64) if start_voxel is None else np.asarray(start_voxel, np.int64).copy()
    last = np.floor(end).astype(np.int64) if end_voxel is None else np.asarray(end_voxel, np.int64)
    step = np.sign(last - cur)
    delta = end - start
    tmax = _initial_tmax(start, cur, step, delta)
    with np.errstate(divide="ignore"):
        tdelta = np.where(delta == 0, _NO_CROSSING, np.abs(1.0 / np.where(delta == 0, 1.0, delta)))

    visited = []
    while np.any(cur != last):
        visited.append(tuple(int(c) for c in cur))
        masked = np.where(cur != last, tmax, _AXIS_DONE)
        axis = int(np.argmin(masked))
        cur[axis] += step[axis]
        tmax[axis] += tdelta[axis]
    return visited


def traverse_batch(starts, ends, start_voxels, end_voxels):
    """Vectorised :func:`traverse` over many rays.

    Returns ``(ray_ids, voxels)``: for every visited (non-end) voxel the index
    of the ray it belongs to and its integer coordinates, shape ``(m, 3)``.
    """
    starts = np.asarray(starts, dtype=float).reshape(-1, 3)
    ends = np.asarray(ends, dtype=float).reshape(-1, 3)
    cur = np.array(start_voxels, dtype=np.int64).reshape(-1, 3)
    last = np.asarray(end_voxels, dtype=np.int64).reshape(-1, 3)
    n = len(cur)
    if n == 0:
        return np.empty(0, np.int64), np.empty((0, 3), np.int64)

    step = np.sign(last - cur)
    delta = ends - starts
    tmax = _initial_tmax(starts, cur, step, delta)
    safe = np.where(delta == 0, 1.0, delta)
    tdelta = np.where(delta == 0, _NO_CROSSING, np.abs(1.0 / safe))

    remaining = np.abs(last - cur).sum(axis=1)
    total = int(remaining.sum())
    out_ids = np.empty(total, np.int64)
    out_vox = np.empty((total, 3), np.int64)
    filled = 0

    active = np.flatnonzero(remaining > 0)
    while active.size:
        c = cur[active]
        k = active.size
        out_ids[filled:filled + k] = active
        out_vox[filled:filled + k] = c
        filled += k

        masked = np.where(c != last[active], tmax[active], _AXIS_DONE)
        axis = np.argmin(masked, axis=1)
        cur[active, axis] += step[active, axis]
        tmax[active, axis] += tdelta[active, axis]
        remaining[active] -= 1
        active = active[remaining[active] > 0]

    return out_ids[:filled], out_vox[:filled]
