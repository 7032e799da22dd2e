"""The exploration loop: fly, scan, map, and pick the next frontier target.

Scheduling follows the planner's cadence: the map and frontier are updated
once per completed submap, and clustering plus target selection run once per
waypoint arrival.  After arriving, the robot hovers until the submap in
progress completes so the plan sees what was observed at the waypoint.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from ..clustering import ExplorationConfig, exploration_parents, mean_shift
from ..frontier import FrontierTracker
from ..metrics import IterationMetrics, MetricsLog, VolumeSample, usec
from ..octree import OccupancyOctree, VoxelState
from ..selection import GainParams, ScoredCandidate, rank_candidates, score_candidates
from ..submap import LidarScan, SubmapPipeline
from .planner import VoxelPlanner, path_length, traversable_mask
from .world import Scenario, simulate_scan

log = logging.getLogger(__name__)


class WallClockExceeded(RuntimeError):
    def __init__(self, metrics: MetricsLog):
        super().__init__("wall-clock cap reached before exploration finished")
        self.metrics = metrics


class Observer:
    """Hooks for streaming results out of a run; the default does nothing."""

    def on_start(self, explorer: "Explorer") -> None:
        pass

    def on_scan(self, scan: LidarScan) -> None:
        pass

    def on_volume(self, sample: VolumeSample) -> None:
        pass

    def on_iteration(self, metrics: IterationMetrics, scored: list[ScoredCandidate], chosen, frontier) -> None:
        pass


@dataclass
class RobotState:
    position: np.ndarray
    v_max: float
    a_max: float
    speed: float = 0.0
    waypoint: int = 0

    def advance(self, path: list[np.ndarray], seg: int, dt: float) -> tuple[int, float]:
        """Move along ``path`` from segment ``seg``; returns (new segment, distance moved)."""
        self.speed = min(self.v_max, self.speed + self.a_max * dt)
        budget = self.speed * dt
        moved = 0.0
        while budget > 1e-12 and seg < len(path) - 1:
            target = path[seg + 1]
            gap = float(np.linalg.norm(target - self.position))
            if gap <= budget:
                self.position = np.array(target, dtype=float)
                budget -= gap
                moved += gap
                seg += 1
            else:
                self.position = self.position + (target - self.position) * (budget / gap)
                moved += budget
                budget = 0.0
        return seg, moved


class Explorer:
    def __init__(self, scenario: Scenario, observer: Observer | None = None):
        self.scenario = scenario
        self.observer = observer or Observer()
        w, p = scenario.world, scenario.planner
        self.octree = OccupancyOctree(w.bounds_min, w.bounds_max, p.r_max, p.d_max)
        self.pipeline = SubmapPipeline(p.n_scans, p.r_max, w.bounds_min, self.octree.shape)
        self.tracker = FrontierTracker(self.octree, p.connectivity)
        self.cluster_cfg = ExplorationConfig.from_depth(p.d_exp, p.r_max, p.d_max, bandwidth=p.bandwidth)
        self.gain = GainParams(p.lam, scenario.gain_cube_side)
        self.rng = np.random.default_rng(scenario.seed)
        self.log = MetricsLog()
        self.visited: set[tuple[int, int, int]] = set()
        self.last_octo = 0.0
        self.last_detect = 0.0
        self.last_origin = scenario.world.start.copy()
        self.robot = RobotState(w.start.copy(), scenario.robot.v_max, scenario.robot.a_max)
        self.observer.on_start(self)

    # -- map update ----------------------------------------------------

    def ingest(self, scan: LidarScan) -> bool:
        """Feed one scan; returns True when it completed a submap."""
        cloud = self.pipeline.accumulate_scan(scan)
        if cloud is None:
            return False
        t0 = time.perf_counter()
        changed = self.octree.integrate_cloud(cloud, cloud.origin)
        t1 = time.perf_counter()
        self.tracker.update(changed)
        t2 = time.perf_counter()
        self.last_octo, self.last_detect = usec(t1 - t0), usec(t2 - t1)
        self.last_origin = cloud.origin
        self.log.submaps += 1
        self.log.skipped_points = self.octree.skipped_points
        return True

    def sample_volume(self, t: float) -> None:
        sample = VolumeSample(round(t, 6), *self.octree.volume_fractions())
        self.log.volumes.append(sample)
        self.observer.on_volume(sample)

    # -- planning iteration ---------------------------------------------

    def _exp_cell(self, voxel) -> tuple[int, int, int]:
        s = self.octree.max_depth - self.cluster_cfg.d_exp
        return tuple(int(v) >> s for v in voxel)

    def plan_iteration(self, plan_paths: bool = True):
        """Cluster, score, select; returns the chosen path (or target) and metrics."""
        fr = self.tracker.frontiers
        j = len(self.log.iterations)
        t0 = time.perf_counter()
        parents = exploration_parents(self.octree, fr.global_, self.cluster_cfg.d_exp)
        centers = self.octree.clipped_centers(parents, self.cluster_cfg.d_exp)
        cands = mean_shift(centers, self.cluster_cfg)
        t1 = time.perf_counter()
        scored = score_candidates(self.octree, self.robot.position, cands.candidates, self.gain)
        ranked = [c for c in rank_candidates(scored) if c.info_gain > 0]
        t2 = time.perf_counter()

        metrics = IterationMetrics(
            j, int(fr.global_.size), int(fr.local.size), len(parents), len(cands),
            self.last_octo, self.last_detect, usec(t1 - t0), usec(t2 - t1),
        )
        chosen, path = None, None
        if plan_paths and ranked:
            chosen, path = self._first_reachable(ranked)
        elif ranked:
            chosen = ranked[0]
        if plan_paths and chosen is None and len(centers) > len(cands):
            # every cluster mode is visited or unreachable; the individual
            # parent cells may still lead somewhere before giving up
            extra = score_candidates(self.octree, self.robot.position, centers, self.gain)
            chosen, path = self._first_reachable([c for c in rank_candidates(extra) if c.info_gain > 0])
            scored = scored + extra
        if chosen is not None:
            metrics.target = chosen.position
            metrics.gain = chosen.total_gain
            self.log.targets.append(chosen.position)
        self.log.iterations.append(metrics)
        self.observer.on_iteration(metrics, scored, chosen, fr)
        return chosen, path, metrics

    def _first_reachable(self, ranked):
        planner = VoxelPlanner(self.octree, self.robot.position, self.scenario.planner.safety_margin)
        self.visited.add(self._exp_cell(planner.start_voxel))
        radius = 2 * self.cluster_cfg.r_exp
        for cand in ranked:
            goal = planner.clamp_goal(cand.position, radius)
            if goal is None or self._exp_cell(goal) in self.visited:
                continue
            voxels = planner.search(goal)
            if voxels is None:
                continue
            self.visited.add(self._exp_cell(goal))
            return cand, planner.to_polyline(voxels)
        return None, None

    def _path_blocked(self, path, seg) -> bool:
        rest = np.asarray(path[seg + 1:])
        if len(rest) == 0:
            return False
        ok = traversable_mask(self.octree, self.scenario.planner.safety_margin)
        here, _ = self.octree.voxel_coords(self.robot.position)
        idx, _ = self.octree.voxel_coords(_densify(np.vstack([self.robot.position, rest]), self.octree.resolution / 4))
        idx = idx[np.any(idx != here[0], axis=1)]
        return not ok[idx[:, 0], idx[:, 1], idx[:, 2]].all()

    def _replan(self, path):
        planner = VoxelPlanner(self.octree, self.robot.position, self.scenario.planner.safety_margin)
        goal = planner.clamp_goal(path[-1], 2 * self.cluster_cfg.r_exp)
        voxels = None if goal is None else planner.search(goal)
        return None if voxels is None else planner.to_polyline(voxels)

    # -- main loop ---------------------------------------------------------

    def run(self, wall_cap: float | None = None) -> MetricsLog:
        sc = self.scenario
        dt = sc.robot.dt
        steps_per_scan = max(1, round(1.0 / (sc.sensor.scan_rate * dt)))
        steps_per_sample = max(1, round(sc.volume_period / dt))
        max_steps = int(round(sc.max_sim_time / dt))
        wall0 = time.monotonic()

        path, seg = None, 0
        awaiting_plan = True
        step = 0
        while True:
            t = step * dt
            if step % steps_per_sample == 0:
                self.sample_volume(t)
            if step % steps_per_scan == 0:
                offset = float(self.rng.uniform(0.0, sc.sensor.azimuth_step))
                scan = simulate_scan(sc.world, self.robot.position, sc.sensor, offset, step // steps_per_scan)
                self.observer.on_scan(scan)
                if self.ingest(scan):
                    if path is not None and self._path_blocked(path, seg):
                        self.log.replans += 1
                        path, seg = self._replan(path), 0
                        if path is None:
                            awaiting_plan = True
                    if awaiting_plan:
                        reason = self._plan_or_stop()
                        if isinstance(reason, str):
                            self.log.termination = reason
                            break
                        path, seg = reason, 0
                        awaiting_plan = False
                        self.robot.speed = 0.0
                        self.robot.waypoint += 1

            if path is not None:
                seg, moved = self.robot.advance(path, seg, dt)
                self.log.distance_travelled += moved
                if seg >= len(path) - 1:
                    path = None
                    awaiting_plan = True
                    self.robot.speed = 0.0
            if sc.world.collides(self.robot.position[None])[0]:
                self.log.collisions += 1

            step += 1
            if step >= max_steps:
                self.log.termination = "sim_time_cap"
                break
            if wall_cap is not None and time.monotonic() - wall0 > wall_cap:
                self.log.sim_time = step * dt
                self.log.termination = "wall_cap"
                raise WallClockExceeded(self.log)

        self.log.sim_time = round(step * dt, 6)
        if not self.log.volumes or self.log.volumes[-1].sim_time != self.log.sim_time:
            self.sample_volume(self.log.sim_time)
        log.info("exploration finished: %s after %.1f s", self.log.termination, self.log.sim_time)
        return self.log

    def _plan_or_stop(self):
        if self.tracker.frontiers.global_.size == 0:
            self.plan_iteration(plan_paths=False)
            return "frontier_empty"
        chosen, path, _ = self.plan_iteration()
        if chosen is None:
            return "no_reachable_gain"
        return path


def _densify(points: np.ndarray, spacing: float) -> np.ndarray:
    out = [points[:1]]
    for a, b in zip(points[:-1], points[1:]):
        n = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        out.append(a + (b - a) * (np.arange(1, n + 1) / n)[:, None])
    return np.vstack(out)


def run_exploration(scenario: Scenario, observer: Observer | None = None, wall_cap: float | None = None) -> MetricsLog:
    return Explorer(scenario, observer).run(wall_cap)


def replay_exploration(scenario: Scenario, scans, observer: Observer | None = None) -> MetricsLog:
    """Drive mapping and target selection from recorded scans (no motion).

    A planning iteration runs after every completed submap with the robot
    placed at that submap's mean sensor origin.
    """
    ex = Explorer(scenario, observer)
    last_t = 0.0
    for scan in scans:
        if ex.ingest(scan):
            ex.robot.position = np.array(ex.last_origin)
            ex.plan_iteration(plan_paths=False)
            last_t = scan.index / scenario.sensor.scan_rate
            ex.sample_volume(last_t)
    ex.log.sim_time = last_t
    ex.log.termination = "replay_end"
    return ex.log


def explored_unknown_fraction(scenario: Scenario, octree: OccupancyOctree) -> float:
    """Unknown share of the ground-truth free space reachable from the start."""
    reach = scenario.world.reachable_voxels(octree.shape, octree.resolution)
    if not reach.any():
        return 0.0
    return float(np.count_nonzero(reach & (octree.grid == VoxelState.UNKNOWN)) / np.count_nonzero(reach))
