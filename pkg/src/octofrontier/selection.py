"""Candidate scoring by discounted information gain and best-target choice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .octree import InvalidQuery, OccupancyOctree

DEFAULT_LAMBDA = 0.1386


@dataclass(frozen=True)
class GainParams:
    lam: float = DEFAULT_LAMBDA
    gain_cube_side: float = 20.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not self.gain_cube_side > 0:
            raise ValueError("gain_cube_side must be positive")


@dataclass(frozen=True)
class ScoredCandidate:
    position: tuple[float, float, float]
    info_gain: float
    distance: float
    total_gain: float
    lam: float = 0.0

    @property
    def log_gain(self) -> float:
        # exp(-lam * L) underflows long before the ordering stops being meaningful
        if self.info_gain <= 0:
            return -math.inf
        return math.log(self.info_gain) - self.lam * self.distance

    def sort_key(self):
        return (-self.log_gain, self.distance, self.position)


def information_gain(octree: OccupancyOctree, candidate, params: GainParams) -> float:
    if not octree.in_bounds(candidate)[0]:
        raise InvalidQuery(f"candidate {tuple(np.ravel(candidate))} is outside the map bounds")
    return octree.unknown_fraction_in_cube(candidate, params.gain_cube_side)


def travel_cost(robot, candidate) -> float:
    return float(np.linalg.norm(np.asarray(robot, dtype=float) - np.asarray(candidate, dtype=float)))


def total_gain(info: float, distance: float, lam: float) -> float:
    return info * math.exp(-lam * distance)


def lambda_from_preference(i1: float, i2: float, l1: float, l2: float) -> float:
    """Distance weight making gain ``i2`` at ``l2`` exactly as good as ``i1`` at ``l1``."""
    if l1 == l2:
        raise ValueError("distances must differ")
    if i1 <= 0 or i2 <= 0:
        raise ValueError("information gains must be positive")
    return math.log(i2 / i1) / (l2 - l1)


def score_candidates(octree: OccupancyOctree, robot, candidates, params: GainParams) -> list[ScoredCandidate]:
    pts = np.asarray(candidates, dtype=float).reshape(-1, 3)
    outside = ~octree.in_bounds(pts)
    if outside.any():
        raise InvalidQuery(f"candidate {tuple(pts[outside][0])} is outside the map bounds")
    info = octree.unknown_fractions(pts, params.gain_cube_side)
    dist = np.linalg.norm(pts - np.asarray(robot, dtype=float).reshape(1, 3), axis=1)
    gain = info * np.exp(-params.lam * dist)
    return [
        ScoredCandidate((float(p[0]), float(p[1]), float(p[2])), float(i), float(d), float(g), params.lam)
        for p, i, d, g in zip(pts, info, dist, gain)
    ]


def rank_candidates(candidates: Sequence[ScoredCandidate]) -> list[ScoredCandidate]:
    """Best first: highest gain, then shorter distance, then lexicographic position."""
    return sorted(candidates, key=ScoredCandidate.sort_key)


def select_best(candidates: Sequence[ScoredCandidate]) -> ScoredCandidate | None:
    """Gain maximiser, or ``None`` when no candidate carries any information."""
    best = None
    for c in candidates:
        if c.info_gain > 0 and (best is None or c.sort_key() < best.sort_key()):
            best = c
    return best
