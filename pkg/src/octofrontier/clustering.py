"""Frontier reduction: octree-parent coarsening, then mean-shift."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .octree import OccupancyOctree, VoxelKey, parent_key

BRUTE_FORCE_LIMIT = 2000
_RADIUS_SLACK = 1.0 + 1e-9


@dataclass
class ExplorationConfig:
    d_exp: int
    r_exp: float
    bandwidth: float = 2.0
    max_iterations: int = 100
    convergence_tol: float | None = None
    kernel: str = "flat"
    neighbor_search: str = "auto"

    def __post_init__(self):
        if self.d_exp < 1:
            raise ValueError("d_exp must be >= 1")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.convergence_tol is None:
            self.convergence_tol = self.r_exp / 100.0
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.kernel not in ("flat", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.neighbor_search not in ("auto", "brute", "tree"):
            raise ValueError(f"unknown neighbor_search {self.neighbor_search!r}")

    @classmethod
    def from_depth(cls, d_exp: int, r_max: float, d_max: int = 16, **kw) -> "ExplorationConfig":
        if not 1 <= d_exp <= d_max:
            raise ValueError(f"d_exp must lie in [1, {d_max}]")
        return cls(d_exp=d_exp, r_exp=r_max * 2 ** (d_max - d_exp), **kw)

    @property
    def merge_radius(self) -> float:
        return self.bandwidth / 2.0


@dataclass
class CandidateSet:
    candidates: np.ndarray
    labels: np.ndarray
    points: np.ndarray
    parents: set = field(default_factory=set)
    iterations: int = 0

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def members(self) -> list[np.ndarray]:
        return [self.points[self.labels == i] for i in range(len(self.candidates))]


def cluster_to_depth(global_frontier: Iterable[VoxelKey], d_exp: int) -> set[VoxelKey]:
    return {parent_key(k, d_exp) for k in global_frontier}


def parent_coords(coords: np.ndarray, shift: int) -> np.ndarray:
    """Unique ancestor coordinates ``shift`` levels up, sorted lexicographically."""
    c = np.asarray(coords, dtype=np.int64).reshape(-1, 3)
    if len(c) == 0:
        return c
    return np.unique(c >> shift, axis=0)


def exploration_parents(octree: OccupancyOctree, frontier_flat: np.ndarray, d_exp: int) -> np.ndarray:
    """Coordinates at ``d_exp`` of all parents of the given finest frontier voxels."""
    if not 1 <= d_exp <= octree.max_depth:
        raise ValueError(f"d_exp must lie in [1, {octree.max_depth}]")
    return parent_coords(octree.unravel(frontier_flat), octree.max_depth - d_exp)


def _brute_means(x, data, cfg, chunk=1024):
    sums = np.zeros_like(x)
    weights = np.zeros(len(x))
    reach = cfg.bandwidth * (3.0 if cfg.kernel == "gaussian" else 1.0) * _RADIUS_SLACK
    data_sq = np.einsum("ij,ij->i", data, data)
    for a in range(0, len(x), chunk):
        xa = x[a:a + chunk]
        d2 = np.einsum("ij,ij->i", xa, xa)[:, None] + data_sq[None, :] - 2.0 * (xa @ data.T)
        w = (d2 <= reach * reach).astype(float)
        if cfg.kernel == "gaussian":
            w *= np.exp(-0.5 * np.maximum(d2, 0.0) / cfg.bandwidth ** 2)
        sums[a:a + chunk] = w @ data
        weights[a:a + chunk] = w.sum(axis=1)
    return sums, weights


def _tree_means(x, data, tree, cfg):
    reach = cfg.bandwidth * (3.0 if cfg.kernel == "gaussian" else 1.0) * _RADIUS_SLACK
    pairs = cKDTree(x).sparse_distance_matrix(tree, reach, output_type="ndarray")
    i, j, d = pairs["i"], pairs["j"], pairs["v"]
    w = np.ones(len(i)) if cfg.kernel == "flat" else np.exp(-0.5 * (d / cfg.bandwidth) ** 2)
    sums = np.stack([np.bincount(i, weights=w * data[j, k], minlength=len(x)) for k in range(3)], axis=1)
    return sums, np.bincount(i, weights=w, minlength=len(x))


def mean_shift(points, config: ExplorationConfig) -> CandidateSet:
    """Shift every point to the mean of its bandwidth window until it settles.

    Settled positions closer than ``bandwidth / 2`` (transitively) are merged;
    each candidate is the mean of its members' settled positions.  Candidates
    are ordered lexicographically by position.
    """
    data = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(data)
    if n == 0:
        return CandidateSet(np.empty((0, 3)), np.empty(0, np.int64), data)

    use_tree = config.neighbor_search == "tree" or (
        config.neighbor_search == "auto" and n > BRUTE_FORCE_LIMIT
    )
    tree = cKDTree(data) if use_tree else None

    x = data.copy()
    active = np.arange(n)
    iterations = 0
    while active.size and iterations < config.max_iterations:
        iterations += 1
        xa = x[active]
        sums, weights = _tree_means(xa, data, tree, config) if use_tree else _brute_means(xa, data, config)
        has = weights > 0
        new = xa.copy()
        new[has] = sums[has] / weights[has, None]
        moved = np.linalg.norm(new - xa, axis=1)
        x[active] = new
        active = active[moved >= config.convergence_tol]

    labels = _merge_modes(x, config.merge_radius)
    k = labels.max() + 1
    counts = np.bincount(labels, minlength=k)
    centers = np.stack([np.bincount(labels, weights=x[:, a], minlength=k) for a in range(3)], axis=1)
    centers /= counts[:, None]

    order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0]))
    relabel = np.empty(k, np.int64)
    relabel[order] = np.arange(k)
    return CandidateSet(centers[order], relabel[labels], data, iterations=iterations)


def _merge_modes(modes: np.ndarray, radius: float) -> np.ndarray:
    n = len(modes)
    if n == 1:
        return np.zeros(1, np.int64)
    pairs = cKDTree(modes).query_pairs(radius, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    return labels.astype(np.int64)
