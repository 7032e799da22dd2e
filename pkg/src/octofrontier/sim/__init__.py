from .explore import Explorer, Observer, RobotState, WallClockExceeded, replay_exploration, run_exploration
from .planner import PlanningError, VoxelPlanner, plan_path
from .world import (
    PlannerParams, RobotParams, Scenario, ScenarioError, ScenarioWorld, SensorModel, load_scenario, simulate_scan,
)
