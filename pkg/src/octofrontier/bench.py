"""Planner scalability sweep over synthetic frontiers of growing size."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .clustering import ExplorationConfig, exploration_parents, mean_shift
from .frontier import FrontierSet, full_frontier, update_global_frontier, update_local_frontier
from .octree import ChangeSet, OccupancyOctree, VoxelState
from .selection import GainParams, score_candidates, select_best

DEFAULT_SIZES = (1_000, 10_000, 100_000)


@dataclass(frozen=True)
class BenchParams:
    r_max: float = 0.5
    d_exp: int = 14
    bandwidth: float = 2.0
    lam: float = 0.1386
    gain_cube_side: float = 20.0
    height: int = 16
    repeats: int = 3


def terrain_map(side: int, seed: int, params: BenchParams = BenchParams()) -> OccupancyOctree:
    """Free space under a smooth random surface, Unknown above, sparse Occupied pillars."""
    rng = np.random.default_rng(seed)
    h = params.height
    x = np.arange(side) / max(side, 1)
    surface = np.full((side, side), h / 2.0)
    for _ in range(6):
        fx, fy = rng.uniform(1, 6, size=2)
        px, py = rng.uniform(0, 2 * math.pi, size=2)
        amp = rng.uniform(0.5, h / 6.0)
        surface += amp * np.sin(2 * math.pi * fx * x + px)[:, None] * np.cos(2 * math.pi * fy * x + py)[None, :]
    surface = np.clip(surface, 1, h - 1)

    tree = OccupancyOctree([0, 0, 0], [side * params.r_max, side * params.r_max, h * params.r_max], params.r_max)
    z = np.arange(h)
    free = z[None, None, :] < surface[:, :, None]
    grid = np.where(free, VoxelState.FREE, VoxelState.UNKNOWN).astype(np.uint8)
    n_pillars = max(1, side * side // 400)
    px = rng.integers(0, side, n_pillars)
    py = rng.integers(0, side, n_pillars)
    grid[px, py, :] = VoxelState.OCCUPIED
    tree.set_states(np.argwhere(grid == VoxelState.FREE), VoxelState.FREE)
    tree.set_states(np.argwhere(grid == VoxelState.OCCUPIED), VoxelState.OCCUPIED)
    return tree


def synthetic_frontier(target: int, seed: int, params: BenchParams = BenchParams()):
    """Map whose frontier has roughly ``target`` voxels, and that frontier."""
    side = max(8, int(math.sqrt(target)))
    tree = terrain_map(side, seed, params)
    found = full_frontier(tree)
    if found.size:
        side = max(8, int(round(side * math.sqrt(target / found.size))))
        tree = terrain_map(side, seed, params)
        found = full_frontier(tree)
    return tree, found


def time_iteration(tree: OccupancyOctree, frontier: np.ndarray, params: BenchParams = BenchParams()) -> dict:
    """Time one planner iteration where the whole frontier was just discovered."""
    cfg = ExplorationConfig.from_depth(params.d_exp, params.r_max, tree.max_depth, bandwidth=params.bandwidth)
    gain = GainParams(params.lam, params.gain_cube_side)
    robot = tree.bounds_min + 0.5 * (tree.bounds_max - tree.bounds_min)
    changed = ChangeSet(frontier, tree.shape, tree.max_depth)

    t0 = time.perf_counter()
    local = update_local_frontier(tree, changed)
    fs = update_global_frontier(FrontierSet(global_=frontier), local, tree)
    t1 = time.perf_counter()
    parents = exploration_parents(tree, fs.global_, cfg.d_exp)
    cands = mean_shift(tree.clipped_centers(parents, cfg.d_exp), cfg)
    t2 = time.perf_counter()
    tree.drop_caches()
    best = select_best(score_candidates(tree, robot, cands.candidates, gain))
    t3 = time.perf_counter()
    return {
        "Fg": int(fs.global_.size), "Fl": int(local.size), "Fexp": len(parents), "Fc": len(cands),
        "t_detect": t1 - t0, "t_cluster": t2 - t1, "t_select": t3 - t2, "t_total": t3 - t0,
        "best": None if best is None else best.position,
    }


def linear_fit(x, y) -> dict:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": min(1.0, max(0.0, r2))}


def run_bench(sizes=DEFAULT_SIZES, seed: int = 0, params: BenchParams = BenchParams(), progress=None) -> dict:
    rows = []
    for target in sizes:
        tree, frontier = synthetic_frontier(target, seed, params)
        runs = [time_iteration(tree, frontier, params) for _ in range(params.repeats)]
        row = {k: runs[0][k] for k in ("Fg", "Fl", "Fexp", "Fc")}
        for k in ("t_detect", "t_cluster", "t_select", "t_total"):
            row[k] = round(statistics.median(r[k] for r in runs), 6)
        row["target"] = int(target)
        rows.append(row)
        if progress:
            progress(row)
    fit = linear_fit([r["Fg"] for r in rows], [r["t_total"] for r in rows]) if len(rows) > 1 else None
    return {"rows": rows, "fit": fit, "seed": seed}
