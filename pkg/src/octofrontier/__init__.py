"""Frontier-based 3D exploration planning on a multi-resolution occupancy octree."""

from .clustering import CandidateSet, ExplorationConfig, cluster_to_depth, mean_shift
from .frontier import FrontierSet, FrontierTracker, frontier_predicate, update_global_frontier, update_local_frontier
from .octree import ChangeSet, InvalidQuery, OccupancyOctree, VoxelKey, VoxelState, parent_key
from .selection import (
    GainParams, ScoredCandidate, information_gain, lambda_from_preference, select_best, total_gain, travel_cost,
)
from .submap import LidarScan, SubmapCloud, SubmapPipeline, load_scans

__version__ = "0.1.0"
