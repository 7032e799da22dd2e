"""Box worlds, the multi-beam lidar model, and scenario files."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np
from scipy import ndimage

from ..submap import LidarScan


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SensorModel:
    max_range: float = 20.0
    vertical_beams: int = 16
    vertical_fov: float = 30.0
    azimuth_step: float = 1.0
    scan_rate: float = 10.0

    def __post_init__(self):
        if not self.max_range > 0:
            raise ValueError("sensor max_range must be positive")
        if self.vertical_beams < 1:
            raise ValueError("sensor needs at least one beam")
        if not 0 < self.azimuth_step <= 360:
            raise ValueError("azimuth_step must lie in (0, 360]")
        if not self.scan_rate > 0:
            raise ValueError("scan_rate must be positive")

    def directions(self, azimuth_offset: float = 0.0) -> np.ndarray:
        """Unit beam directions, elevation-major, in the world frame."""
        if self.vertical_beams == 1:
            elev = np.zeros(1)
        else:
            half = self.vertical_fov / 2.0
            elev = np.linspace(-half, half, self.vertical_beams)
        az = np.arange(0.0, 360.0 - 1e-9, self.azimuth_step) + azimuth_offset
        e, a = np.meshgrid(np.radians(elev), np.radians(az), indexing="ij")
        d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1)
        return d.reshape(-1, 3)


@dataclass
class ScenarioWorld:
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    obstacles: np.ndarray = field(default_factory=lambda: np.empty((0, 2, 3)))
    start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    start_yaw: float = 0.0
    solid_bounds: bool = True

    def __post_init__(self):
        self.bounds_min = np.asarray(self.bounds_min, dtype=float).reshape(3)
        self.bounds_max = np.asarray(self.bounds_max, dtype=float).reshape(3)
        self.obstacles = np.asarray(self.obstacles, dtype=float).reshape(-1, 2, 3)
        self.start = np.asarray(self.start, dtype=float).reshape(3)
        if np.any(self.bounds_max <= self.bounds_min):
            raise ScenarioError("bounds max must exceed bounds min")
        if np.any(self.obstacles[:, 1] <= self.obstacles[:, 0]):
            raise ScenarioError("every obstacle needs max corner > min corner")
        if not self.contains(self.start):
            raise ScenarioError("start lies outside the bounds")
        if self.collides(self.start[None])[0]:
            raise ScenarioError("start lies inside an obstacle")

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.bounds_min) and np.all(p <= self.bounds_max))

    def collides(self, points, tol: float = 1e-9) -> np.ndarray:
        """True where a point is strictly inside an obstacle or outside the bounds."""
        p = np.asarray(points, dtype=float).reshape(-1, 1, 3)
        if len(self.obstacles):
            lo, hi = self.obstacles[None, :, 0], self.obstacles[None, :, 1]
            inside = np.all((p > lo + tol) & (p < hi - tol), axis=2).any(axis=1)
        else:
            inside = np.zeros(len(p), dtype=bool)
        outside = ~np.all((p[:, 0] >= self.bounds_min - tol) & (p[:, 0] <= self.bounds_max + tol), axis=1)
        return inside | outside

    def raycast(self, origin, directions, max_range: float) -> np.ndarray:
        """Distance to the nearest surface along each direction (``inf`` for no hit in range)."""
        o = np.asarray(origin, dtype=float).reshape(3)
        d = np.asarray(directions, dtype=float).reshape(-1, 3)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d
            best = np.full(len(d), np.inf)
            if len(self.obstacles):
                lo = self.obstacles[:, 0][None] - o
                hi = self.obstacles[:, 1][None] - o
                t1 = lo * inv[:, None, :]
                t2 = hi * inv[:, None, :]
                near = np.where(np.isnan(t1) | np.isnan(t2), -np.inf, np.minimum(t1, t2))
                far = np.where(np.isnan(t1) | np.isnan(t2), np.inf, np.maximum(t1, t2))
                t_in = near.max(axis=2)
                t_out = far.min(axis=2)
                hit = (t_in <= t_out) & (t_in >= 0)
                best = np.where(hit, t_in, np.inf).min(axis=1)
            if self.solid_bounds:
                exit_t = np.where(d > 0, (self.bounds_max - o) * inv, np.where(d < 0, (self.bounds_min - o) * inv, np.inf))
                best = np.minimum(best, exit_t.min(axis=1))
        best[best > max_range] = np.inf
        return best

    def voxel_truth(self, shape, resolution: float) -> np.ndarray:
        """Boolean grid: voxel center strictly inside an obstacle."""
        axes = [self.bounds_min[i] + (np.arange(shape[i]) + 0.5) * resolution for i in range(3)]
        solid = np.zeros(shape, dtype=bool)
        for lo, hi in self.obstacles:
            sel = [(a > lo[i]) & (a < hi[i]) for i, a in enumerate(axes)]
            solid |= sel[0][:, None, None] & sel[1][None, :, None] & sel[2][None, None, :]
        return solid

    def reachable_voxels(self, shape, resolution: float) -> np.ndarray:
        """Voxels 6-connected to the start voxel through obstacle-free voxel centers."""
        free = ~self.voxel_truth(shape, resolution)
        labels, _ = ndimage.label(free)
        start = np.clip(np.floor((self.start - self.bounds_min) / resolution).astype(int), 0, np.asarray(shape) - 1)
        lab = labels[tuple(start)]
        if lab == 0:
            return np.zeros(shape, dtype=bool)
        return labels == lab


def simulate_scan(world: ScenarioWorld, pose, sensor: SensorModel, azimuth_offset: float = 0.0, index: int = 0) -> LidarScan:
    """Nearest-hit returns of every beam within range, as world-frame points.

    ``pose`` is ``(x, y, z)`` or ``(x, y, z, yaw)``; the lidar spins a full
    turn, so yaw only shifts the azimuth origin.
    """
    pose = np.asarray(pose, dtype=float).ravel()
    origin = pose[:3]
    yaw = math.degrees(pose[3]) if pose.size > 3 else 0.0
    dirs = sensor.directions(azimuth_offset + yaw)
    t = world.raycast(origin, dirs, sensor.max_range)
    hit = np.isfinite(t)
    return LidarScan(origin + dirs[hit] * t[hit, None], origin, index)


@dataclass(frozen=True)
class PlannerParams:
    r_max: float = 0.5
    d_exp: int = 15
    bandwidth: float = 2.0
    lam: float = 0.1386
    gain_cube_side: float | None = None
    n_scans: int = 10
    safety_margin: float = 0.5
    d_max: int = 16
    connectivity: int = 6

    @property
    def r_exp(self) -> float:
        return self.r_max * 2 ** (self.d_max - self.d_exp)


@dataclass(frozen=True)
class RobotParams:
    v_max: float = 0.8
    a_max: float = 0.5
    dt: float = 0.05


@dataclass
class Scenario:
    world: ScenarioWorld
    sensor: SensorModel
    planner: PlannerParams
    robot: RobotParams = field(default_factory=RobotParams)
    seed: int = 0
    name: str = "scenario"
    max_sim_time: float = 3600.0
    volume_period: float = 1.0

    @property
    def gain_cube_side(self) -> float:
        side = self.planner.gain_cube_side
        return self.sensor.max_range if side is None else side

    def with_overrides(self, **kw) -> "Scenario":
        """Copy with planner fields or ``seed`` replaced (``None`` values ignored)."""
        kw = {k: v for k, v in kw.items() if v is not None}
        seed = kw.pop("seed", self.seed)
        planner = replace(self.planner, **kw) if kw else self.planner
        _check_planner(planner, self.world)
        return replace(self, planner=planner, seed=seed)


def _check_planner(p: PlannerParams, world: ScenarioWorld) -> None:
    if not p.r_max > 0:
        raise ScenarioError("r_max must be positive")
    if not 1 <= p.d_exp <= p.d_max:
        raise ScenarioError(f"d_exp must lie in [1, {p.d_max}]")
    if not p.bandwidth > 0:
        raise ScenarioError("bandwidth must be positive")
    if p.lam < 0:
        raise ScenarioError("lambda must be non-negative")
    if p.gain_cube_side is not None and not p.gain_cube_side > 0:
        raise ScenarioError("gain_cube_side must be positive")
    if p.n_scans < 1:
        raise ScenarioError("N_s must be >= 1")
    if p.safety_margin < 0:
        raise ScenarioError("safety_margin must be non-negative")
    extent = (world.bounds_max - world.bounds_min) / p.r_max
    if np.max(np.ceil(extent - 1e-9)) > 2 ** p.d_max:
        raise ScenarioError("bounds do not fit in the octree at this r_max")


_PLANNER_KEYS = {
    "r_max": "r_max", "d_exp": "d_exp", "bandwidth": "bandwidth", "lambda": "lam",
    "gain_cube_side": "gain_cube_side", "N_s": "n_scans", "safety_margin": "safety_margin",
    "d_max": "d_max", "connectivity": "connectivity",
}
_SENSOR_KEYS = {
    "range": "max_range", "beams": "vertical_beams", "fov": "vertical_fov",
    "azimuth_step": "azimuth_step", "rate": "scan_rate",
}


def _box(value, what):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ScenarioError(f"{what} must be a pair of 3-vectors") from None
    if arr.shape != (2, 3):
        raise ScenarioError(f"{what} must be a pair of 3-vectors")
    return arr


def _pick(section: dict, mapping: dict, what: str) -> dict:
    unknown = set(section) - set(mapping)
    if unknown:
        raise ScenarioError(f"unknown {what} keys: {sorted(unknown)}")
    return {mapping[k]: v for k, v in section.items()}


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    for key in ("bounds", "start", "sensor", "planner"):
        if key not in data:
            raise ScenarioError(f"scenario is missing '{key}'")
    bounds = _box(data["bounds"], "bounds")
    obstacles = [_box(o, f"obstacle {i}") for i, o in enumerate(data.get("obstacles", []))]
    start = np.asarray(data["start"], dtype=float).ravel()
    if start.size not in (3, 4):
        raise ScenarioError("start must be [x, y, z] or [x, y, z, yaw]")
    try:
        world = ScenarioWorld(
            bounds[0], bounds[1], np.array(obstacles).reshape(-1, 2, 3), start[:3],
            float(start[3]) if start.size == 4 else 0.0, bool(data.get("solid_bounds", True)),
        )
        sensor = SensorModel(**_pick(data["sensor"], _SENSOR_KEYS, "sensor"))
        planner = PlannerParams(**_pick(data["planner"], _PLANNER_KEYS, "planner"))
        robot = RobotParams(**data.get("robot", {}))
    except TypeError as exc:
        raise ScenarioError(str(exc)) from None
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    _check_planner(planner, world)
    return Scenario(
        world, sensor, planner, robot, seed=int(data.get("seed", 0)), name=name,
        max_sim_time=float(data.get("max_sim_time", 3600.0)),
        volume_period=float(data.get("volume_period", 1.0)),
    )


def bundled_scenarios() -> list[str]:
    return sorted(p.name for p in resources.files("octofrontier").joinpath("scenarios").iterdir()
                  if p.name.endswith(".json"))


def load_scenario(path: str | os.PathLike) -> Scenario:
    """Load a scenario JSON file; bare names fall back to the bundled scenarios."""
    path = os.fspath(path)
    if not os.path.exists(path) and os.path.basename(path) == path and path in bundled_scenarios():
        text = resources.files("octofrontier").joinpath("scenarios", path).read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return scenario_from_dict(data, name=os.path.splitext(os.path.basename(path))[0])
